"""Acceptance criteria, one test per criterion.

Criteria run against the default population (600 households, calendar-year
window) produced by the real pipeline stages in a shared workspace fixture;
stage wall times recorded there back the runtime criteria. Each test prints
one `[acceptance] criterion N` line (visible with `pytest -s` or on failure).

The cold-start experiment (criterion 7) is its own protocol run and is not
part of the criterion-10 pipeline budget, which covers the synth ->
eval-clustered -> report chain.
"""

import json
import time
from collections import Counter

import numpy as np
import pytest

from lumirec.config import load_config
from lumirec.experiments import run_clustered_experiment, run_cold_start, run_pooled_experiment
from lumirec.metrics import (
    ConfusionMatrix,
    adjusted_rand_index,
    confusion,
    metrics,
    weighted_cluster_aggregate,
)
from lumirec.models import ModelSpec, model_from_jsonable
from lumirec.pipeline import (
    STAGE_RUNNERS,
    Workspace,
    load_cluster_assignment,
    load_experiment_data,
)
from lumirec.synth import load_ground_truth
from lumirec.util import derive_seed

from test_metrics import make_scalar_report

PIPELINE_CHAIN = ("synth", "ingest", "routine", "features", "cluster", "train",
                  "eval-pooled", "eval-clustered", "report")


def note(criterion: int, name: str, detail: str) -> None:
    print(f"[acceptance] criterion {criterion} ({name}): PASS - {detail}")


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """Full default pipeline in a fresh workspace, with per-stage timings."""
    root = tmp_path_factory.mktemp("default-pipeline")
    ws = Workspace(root, load_config())
    timings = {}
    for stage in PIPELINE_CHAIN:
        start = time.perf_counter()
        STAGE_RUNNERS[stage](ws)
        timings[stage] = time.perf_counter() - start
    return ws, timings


class TestCriterion1MetricsOracle:
    def test_metrics_match_brute_force_tally(self):
        rng = np.random.default_rng(101)
        start = time.perf_counter()
        for _ in range(1000):
            class_count = int(rng.integers(2, 10))
            n = int(rng.integers(1, 201))
            y_true = rng.integers(0, class_count, n)
            y_pred = rng.integers(0, class_count, n)
            report = metrics(confusion(y_true, y_pred, class_count))

            pair_counts = Counter(zip(y_true.tolist(), y_pred.tolist()))
            hits = sum(c for (t, p), c in pair_counts.items() if t == p)
            assert abs(report.accuracy - hits / n) <= 1e-12
            recalls = []
            for c in range(class_count):
                tp = pair_counts.get((c, c), 0)
                fn = sum(v for (t, p), v in pair_counts.items() if t == c and p != c)
                fp = sum(v for (t, p), v in pair_counts.items() if t != c and p == c)
                tn = n - tp - fn - fp
                pc = report.per_class[c]
                assert abs(pc.precision - (tp / (tp + fp) if tp + fp else 0.0)) <= 1e-12
                recall = tp / (tp + fn) if tp + fn else 0.0
                assert abs(pc.recall - recall) <= 1e-12
                assert abs(pc.specificity - (tn / (tn + fp) if tn + fp else 0.0)) <= 1e-12
                f1 = (2 * pc.precision * recall / (pc.precision + recall)
                      if pc.precision + recall else 0.0)
                assert abs(pc.f1 - f1) <= 1e-12
                recalls.append(recall)
            assert abs(report.balanced_accuracy - np.mean(recalls)) <= 1e-12
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0
        note(1, "metrics oracle", f"1000 random label pairs in {elapsed:.1f}s")


class TestCriterion2PaperArithmetic:
    def test_weighted_accuracy_table(self):
        agg = weighted_cluster_aggregate([
            (make_scalar_report(0.987), 133),
            (make_scalar_report(0.972), 259),
            (make_scalar_report(0.965), 263),
        ])
        assert round(agg.accuracy, 3) == 0.972
        balanced = weighted_cluster_aggregate([
            (make_scalar_report(0.5, balanced=0.98), 133),
            (make_scalar_report(0.5, balanced=0.93), 259),
            (make_scalar_report(0.5, balanced=0.94), 263),
        ])
        assert round(balanced.balanced_accuracy, 3) == 0.944
        note(2, "weighted aggregation arithmetic",
             f"accuracy {agg.accuracy:.4f} -> 0.972, balanced "
             f"{balanced.balanced_accuracy:.4f} -> 0.944")


class TestCriterion3BinaryEquivalence:
    def test_eq8_equals_mean_recall_exactly(self):
        rng = np.random.default_rng(33)
        checked = 0
        while checked < 1000:
            counts = rng.integers(0, 100, size=(2, 2))
            if counts.sum() == 0:
                continue
            report = metrics(ConfusionMatrix(counts))
            positive = report.per_class[1]
            assert report.balanced_accuracy == (positive.recall + positive.specificity) / 2
            checked += 1
        note(3, "binary balanced-accuracy equivalence", "1000 matrices, exact equality")


class TestCriterion4RoutineRecovery:
    def test_recovery_rate_and_runtime(self, default_run):
        ws, timings = default_run
        truth = load_ground_truth(ws.dir("synth") / "ground_truth.json")

        plans = {}
        with (ws.dir("routine") / "routines.csv").open() as fh:
            next(fh)
            for line in fh:
                household, room, start, end, _ = line.strip().split(",")
                key = (household, room)
                plans.setdefault(key, []).append(
                    (int(start[:2]) * 60 + int(start[2:]), int(end[:2]) * 60 + int(end[2:])))

        total = 0
        hits = 0
        for hub, info in truth["households"].items():
            for room, room_info in info["rooms"].items():
                total += 1
                windows = sorted([(w[0], w[1]) for w in room_info["windows"]])
                got = sorted(plans.get((hub, room), []))
                if len(got) != len(windows):
                    continue
                if all(abs(gs - ws_) <= 10 and abs(ge - we) <= 10
                       for (gs, ge), (ws_, we) in zip(got, windows)):
                    hits += 1
        rate = hits / total
        runtime = timings["ingest"] + timings["routine"]
        assert rate >= 0.95, f"recovery rate {rate:.3f}"
        assert runtime < 120.0, f"ingest+routine took {runtime:.0f}s"
        note(4, "routine recovery",
             f"{hits}/{total} entities within +-10 min, ingest+routine {runtime:.0f}s")


class TestCriterion5ClusterRecovery:
    def test_k_three_and_ari(self, default_run):
        ws, _ = default_run
        assignment, payload = load_cluster_assignment(ws)
        assert payload["k"] == 3
        truth = load_ground_truth(ws.dir("synth") / "ground_truth.json")
        persona_names = sorted({info["persona"] for info in truth["households"].values()})
        planted = []
        assigned = []
        for (household, room), cluster in sorted(assignment.items()):
            planted.append(persona_names.index(truth["households"][household]["persona"]))
            assigned.append(cluster)
        ari = adjusted_rand_index(planted, assigned)
        assert ari >= 0.9
        note(5, "cluster recovery", f"k=3 selected, ARI {ari:.3f}")


class TestCriterion6ClusteredBeatsPooled:
    def test_margin_exceeds_seed_std(self, default_run):
        ws, _ = default_run
        data = load_experiment_data(ws)
        assignment, _ = load_cluster_assignment(ws)
        spec = ModelSpec("random_forest", {"n_trees": 50, "max_depth": 8, "min_leaf": 4})
        gaps = []
        pooled_accs = []
        clustered_accs = []
        for s in range(5):
            seed = derive_seed(ws.seed, "criterion6", s)
            pooled = run_pooled_experiment(data, {"random_forest": spec}, seed=seed)
            clustered = run_clustered_experiment(data, assignment, spec, seed=seed)
            pooled_accs.append(pooled.results["random_forest"].report.accuracy)
            clustered_accs.append(clustered.weighted.accuracy)
            gaps.append(clustered_accs[-1] - pooled_accs[-1])
        margin = float(np.mean(gaps))
        spread = float(np.std(gaps))
        assert margin > spread, f"margin {margin:.4f} vs across-seed std {spread:.4f}"
        note(6, "clustered beats pooled",
             f"pooled {np.mean(pooled_accs):.4f}, clustered {np.mean(clustered_accs):.4f}, "
             f"margin {margin:.4f} > std {spread:.4f}")


class TestCriterion7ColdStart:
    def test_protocol_shape_and_directions(self, default_run):
        ws, _ = default_run
        data = load_experiment_data(ws)
        assignment, _ = load_cluster_assignment(ws)
        cfg = ws.config["coldstart"]
        report = run_cold_start(
            data, ModelSpec.from_jsonable(cfg["spec"]), assignment,
            scenarios=(0.10, 0.25, 0.40), iterations=20, folds=int(cfg["folds"]),
            seed=derive_seed(ws.seed, "coldstart"),
            train_rows_cap=cfg["train_rows_cap"])
        assert len(report.scenarios) == 3
        assert report.iterations == 20
        stds = [s.independent.std for s in report.scenarios]
        assert stds[0] > stds[1] > stds[2], f"independent-test stds not decreasing: {stds}"
        for scenario in report.scenarios:
            assert scenario.clustered_cv is not None
            assert scenario.clustered_cv.mean >= scenario.test_cv.mean, (
                f"clustered {scenario.clustered_cv.mean:.4f} < "
                f"unclustered {scenario.test_cv.mean:.4f} at {scenario.test_frac}")
        note(7, "cold start",
             f"independent stds {['%.4f' % s for s in stds]} decreasing; "
             f"clustered >= unclustered in all scenarios")


class TestCriterion8ClassifierSanity:
    def test_all_families_beat_bayes_floor(self, default_run):
        ws, _ = default_run
        results = json.loads(ws.results_path().read_text())
        flip = float(ws.config["synth"]["flip_probability"])
        floor = 1.0 - flip - 0.05
        accs = {family: info["metrics"]["accuracy"]
                for family, info in results["pooled"]["families"].items()}
        for family, acc in accs.items():
            assert acc >= floor, f"{family} accuracy {acc:.4f} below {floor:.2f}"
        model = model_from_jsonable(
            json.loads((ws.dir("train") / "models" / "gradient_boost.json").read_text()))
        losses = model.train_loss_
        assert losses, "boosting model carries no loss history"
        assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:])), \
            "training log-loss increased between rounds"
        note(8, "classifier sanity",
             f"accuracies {({k: round(v, 4) for k, v in accs.items()})} >= {floor:.2f}; "
             f"GBT loss monotone over {len(losses)} rounds")


class TestCriterion9Determinism:
    def test_byte_identical_results_across_thread_counts(self, tmp_path):
        config = load_config(overrides={
            "study": {"start": "2019-01-01", "end": "2019-02-28"},
            "synth": {"households": 24},
            "clustering": {"k_max": 6, "n_init": 3},
            "train": {"folds": 2, "grids": {
                "random_forest": {"n_trees": [8], "max_depth": [8]},
                "gradient_boost": {"n_trees": [6], "max_depth": [3],
                                   "learning_rate": [0.3]},
                "knn": {"n_neighbors": [5]},
            }},
            "coldstart": {"iterations": 2, "folds": 3,
                          "spec": {"family": "random_forest",
                                   "params": {"n_trees": 6, "max_depth": 8}}},
        })
        payloads = []
        for name, threads in (("run-a", 1), ("run-b", 3)):
            run_config = dict(config)
            run_config["threads"] = threads
            ws = Workspace(tmp_path / name, run_config)
            for stage in ("synth", "ingest", "routine", "features", "cluster",
                          "train", "eval-pooled", "eval-clustered", "coldstart"):
                STAGE_RUNNERS[stage](ws)
            payloads.append(ws.results_path().read_bytes())
        assert payloads[0] == payloads[1]
        note(9, "determinism", "results.json byte-identical at threads 1 vs 3")


class TestCriterion10PipelineRuntime:
    def test_full_default_pipeline_under_budget(self, default_run):
        _, timings = default_run
        total = sum(timings.values())
        assert total < 900.0, f"pipeline took {total:.0f}s: {timings}"
        breakdown = ", ".join(f"{k} {v:.0f}s" for k, v in timings.items())
        note(10, "pipeline runtime", f"total {total:.0f}s ({breakdown})")
