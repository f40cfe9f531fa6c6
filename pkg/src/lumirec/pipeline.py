"""Pipeline stages over a workspace directory.

Each stage reads its predecessor's artifacts, writes its own plus a
manifest recording the stage inputs, config digest, seed, and package
version. Missing predecessors raise MissingArtifact naming the stage to
run first. All artifacts are deterministic functions of (config, seed);
manifests carry no timestamps so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
import zipfile
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import __version__
from .clustering import build_cluster_vector, cdf_rows, country_table, select_k
from .config import effective_hash, study_window
from .errors import ConfigHashMismatch, MissingArtifact
from .experiments import (
    ExperimentData,
    run_clustered_experiment,
    run_cold_start,
    run_pooled_experiment,
    split_rows,
)
from .features import (
    CSV_COLUMNS,
    FEATURE_NAMES,
    FeatureCodes,
    FeatureRow,
    Period,
    compute_feature_importance,
    entity_feature_rows,
    fit_codes,
)
from .ingest import (
    IngestReport,
    Room,
    StateSeries,
    iter_event_log,
    reconstruct_entity,
)
from .metrics import MetricReport
from .models import FAMILY_LABELS, ModelSpec, grid_search, model_from_jsonable, model_to_jsonable
from .models.forest import RandomForest
from .routine import FrequencyProfile, frequency_profile, recommend_routine
from .synth import PersonaSpec, default_population, generate
from .util import MINUTES_PER_DAY, canonical_json, derive_seed, minutes_to_hhmm

STAGES = ("synth", "ingest", "routine", "features", "cluster", "train",
          "eval-pooled", "eval-clustered", "coldstart", "report")


@dataclass
class Workspace:
    root: Path
    config: dict
    synth_dir: Path | None = None  # optional redirect for the synth artifact

    def __post_init__(self):
        self.root = Path(self.root)

    @property
    def config_hash(self) -> str:
        return effective_hash(self.config)

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    @property
    def threads(self) -> int:
        return int(self.config["threads"])

    def dir(self, stage: str) -> Path:
        if stage == "synth" and self.synth_dir is not None:
            folder = Path(self.synth_dir)
        else:
            folder = self.root / stage.replace("eval-", "reports/")
            if stage == "coldstart":
                folder = self.root / "reports" / "coldstart"
            if stage == "report":
                folder = self.root / "reports" / "figures"
        folder.mkdir(parents=True, exist_ok=True)
        return folder

    def manifest_path(self, stage: str) -> Path:
        return self.dir(stage) / "manifest.json"

    def write_manifest(self, stage: str, inputs: list[str], **extra) -> None:
        manifest = {
            "stage": stage,
            "format_version": 1,
            "package_version": __version__,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "inputs": sorted(inputs),
            **extra,
        }
        self.manifest_path(stage).write_text(json.dumps(manifest, indent=1, sort_keys=True))

    def require(self, stage: str) -> dict:
        path = self.manifest_path(stage)
        if not path.exists():
            raise MissingArtifact(stage)
        return json.loads(path.read_text())

    def results_path(self) -> Path:
        folder = self.root / "reports"
        folder.mkdir(parents=True, exist_ok=True)
        return folder / "results.json"

    def merge_results(self, section: str, payload: dict) -> None:
        path = self.results_path()
        merged = json.loads(path.read_text()) if path.exists() else {}
        merged["config_hash"] = self.config_hash
        merged["seed"] = self.seed
        merged[section] = payload
        path.write_text(json.dumps(merged, indent=1, sort_keys=True))


# --- npz streaming helpers ----------------------------------------------------

def write_npz_stream(path: Path, arrays: Iterable[tuple[str, np.ndarray]]) -> None:
    """Write an .npz one member at a time (np.load reads it lazily)."""
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED, allowZip64=True) as zf:
        for name, arr in arrays:
            with zf.open(name + ".npy", "w", force_zip64=True) as member:
                np.lib.format.write_array(member, np.ascontiguousarray(arr))


def entity_key(household: str, room: Room) -> str:
    return f"{household}|{room.value}"


def parse_entity_key(key: str) -> tuple[str, Room]:
    household, room = key.split("|")
    return household, Room(room)


# --- stages -------------------------------------------------------------------

def stage_synth(ws: Workspace) -> dict:
    cfg = ws.config["synth"]
    out = ws.dir("synth")
    if cfg["personas"]:
        raw = json.loads(Path(cfg["personas"]).read_text())
        specs = [PersonaSpec.from_jsonable(item) for item in raw]
    else:
        specs = default_population(
            ws.seed, households=int(cfg["households"]),
            noise_rate=float(cfg["noise_rate"]),
            flip_probability=float(cfg["flip_probability"]))
    result = generate(specs, study_window(ws.config), ws.seed, out,
                      scene_count=int(ws.config["scene_count"]),
                      jitter_minutes=int(cfg["jitter_minutes"]))
    ws.write_manifest("synth", inputs=[], n_events=result.n_events,
                      n_households=result.n_households)
    return {"events": str(result.events_path), "n_events": result.n_events,
            "n_households": result.n_households}


def _events_path(ws: Workspace) -> Path:
    override = ws.config["ingest"]["events"]
    if override:
        path = Path(override)
        if not path.exists():
            raise MissingArtifact("synth")
        return path
    path = ws.dir("synth") / "events.ndjson"
    if not path.exists():
        raise MissingArtifact("synth")
    return path


def stage_ingest(ws: Workspace) -> dict:
    """Parse the event log and write packed per-entity state grids."""
    events_file = _events_path(ws)
    window = study_window(ws.config)
    cap = float(ws.config["ingest"]["stale_on_cap_hours"])
    out = ws.dir("ingest")

    report = IngestReport()
    orders: dict[tuple[str, Room], list] = {}
    geo: dict[str, tuple[str, str]] = {}
    with events_file.open() as fh:
        for event in iter_event_log(fh, report):
            key = (event.hub_id, event.room)
            scene = event.scene_id if event.scene_id is not None else -1
            orders.setdefault(key, []).append(
                (event.timestamp.timestamp(), event.light_id, int(event.action), scene))
            if event.hub_id not in geo:
                geo[event.hub_id] = (event.city, event.country)

    entities = sorted(orders, key=lambda e: (e[0], e[1].value))

    def packed_arrays() -> Iterator[tuple[str, np.ndarray]]:
        for key in entities:
            entity_orders = sorted(orders.pop(key))
            entity_orders = [(t, light, action, scene, seq)
                             for seq, (t, light, action, scene) in enumerate(entity_orders)]
            state = reconstruct_entity(key[0], key[1], entity_orders, window, cap)
            yield "grid/" + entity_key(*key), np.packbits(state.grid, axis=1)
            yield "scene/" + entity_key(*key), state.scene_grid

    write_npz_stream(out / "states.npz", packed_arrays())

    meta = {
        "window": [window[0].isoformat(), window[1].isoformat()],
        "entities": [entity_key(*key) for key in entities],
        "geo": {hub: {"city": city, "country": country}
                for hub, (city, country) in sorted(geo.items())},
        "stale_on_cap_hours": cap,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    (out / "report.json").write_text(json.dumps({
        "total": report.total,
        "parsed": report.parsed,
        "skipped": report.skipped,
        "households": report.households,
        "rooms": report.rooms,
        "date_span": report.date_span,
    }, indent=1, sort_keys=True))
    ws.write_manifest("ingest", inputs=[str(events_file)],
                      entities=len(entities), parsed=report.parsed)
    return {"entities": len(entities), "report": report}


def iter_states(ws: Workspace) -> Iterator[StateSeries]:
    """Stream reconstructed StateSeries back out of the ingest artifact."""
    ws.require("ingest")
    folder = ws.dir("ingest")
    meta = json.loads((folder / "meta.json").read_text())
    window = study_window(ws.config)
    days = [window[0] + timedelta(days=i)
            for i in range((window[1] - window[0]).days + 1)]
    with np.load(folder / "states.npz") as npz:
        for key in meta["entities"]:
            household, room = parse_entity_key(key)
            packed = npz["grid/" + key]
            grid = np.unpackbits(packed, axis=1, count=MINUTES_PER_DAY).astype(bool)
            yield StateSeries(household, room, days, grid, npz["scene/" + key])


def load_geo(ws: Workspace) -> dict[str, tuple[str, str]]:
    meta = json.loads((ws.dir("ingest") / "meta.json").read_text())
    return {hub: (info["city"], info["country"])
            for hub, info in meta["geo"].items()}


def stage_routine(ws: Workspace) -> dict:
    ws.require("ingest")
    cfg = ws.config["routine"]
    out = ws.dir("routine")
    profile_dir = out / "profiles"

    entities: list[str] = []
    matrix: list[np.ndarray] = []
    routine_rows: list[tuple] = []
    degenerate = 0
    for state in iter_states(ws):
        profile = frequency_profile(state)
        plan = recommend_routine(profile, merge_gap=int(cfg["merge_gap"]),
                                 min_len=int(cfg["min_len"]))
        key = entity_key(state.household, state.room)
        entities.append(key)
        matrix.append(profile.values.astype(np.float32))
        degenerate += plan.degenerate
        for start, end in plan.intervals:
            routine_rows.append((state.household, state.room.value,
                                 minutes_to_hhmm(start), minutes_to_hhmm(end),
                                 f"{plan.threshold:.6f}"))
        if cfg["write_profiles"]:
            profile_dir.mkdir(exist_ok=True)
            lines = ["minute,frequency"]
            lines += [f"{m},{v:.6f}" for m, v in enumerate(profile.values)]
            (profile_dir / f"{state.household}_{state.room.value}.csv").write_text(
                "\n".join(lines) + "\n")

    with (out / "routines.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["household", "room", "start_hhmm", "end_hhmm", "threshold"])
        writer.writerows(routine_rows)
    write_npz_stream(out / "profiles.npz",
                     [("profiles", np.stack(matrix) if matrix else np.zeros((0, MINUTES_PER_DAY)))])
    (out / "profiles_index.json").write_text(json.dumps(entities, indent=1))
    ws.write_manifest("routine", inputs=["ingest/states.npz"],
                      entities=len(entities), intervals=len(routine_rows),
                      degenerate_profiles=degenerate)
    return {"entities": len(entities), "intervals": len(routine_rows)}


def stage_features(ws: Workspace) -> dict:
    ws.require("ingest")
    out = ws.dir("features")
    geo = load_geo(ws)
    scene_count = int(ws.config["scene_count"])

    rows: list[FeatureRow] = []
    for state in iter_states(ws):
        city, country = geo.get(state.household, ("", ""))
        rows.extend(entity_feature_rows(state, city, country, scene_count))
    codes = fit_codes(rows)

    with (out / "features.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([
                r.household, ROOM_CODES[r.room], codes.country.encode(r.country),
                codes.city.encode(r.city), r.month, r.hour, int(r.period),
                r.monthly_turn_on, f"{r.avg_turn_on_monthly:.9f}",
                r.quarterly_turn_on, f"{r.avg_turn_on_quarterly:.9f}",
                r.yearly_turn_on, f"{r.yearly_avg_turn_on:.9f}", r.label,
            ])
    (out / "codes.json").write_text(json.dumps(codes.to_jsonable(), indent=1, sort_keys=True))
    ws.write_manifest("features", inputs=["ingest/states.npz"], rows=len(rows))
    return {"rows": len(rows)}


ROOM_CODES = {Room.ROOM1: 0, Room.ROOM2: 1}
_ROOM_FROM_CODE = {0: Room.ROOM1, 1: Room.ROOM2}


def load_feature_rows(ws: Workspace) -> tuple[list[FeatureRow], FeatureCodes]:
    """Read features.csv back into FeatureRow objects via codes.json."""
    ws.require("features")
    folder = ws.dir("features")
    codes = FeatureCodes.from_jsonable(json.loads((folder / "codes.json").read_text()))
    rows: list[FeatureRow] = []
    with (folder / "features.csv").open() as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            country_code = int(rec["country"])
            city_code = int(rec["city"])
            rows.append(FeatureRow(
                household=rec["household"],
                room=_ROOM_FROM_CODE[int(rec["room"])],
                country=(codes.country.categories[country_code]
                         if country_code < len(codes.country.categories) else ""),
                city=(codes.city.categories[city_code]
                      if city_code < len(codes.city.categories) else ""),
                month=int(rec["month"]),
                hour=int(rec["hour"]),
                period=Period(int(rec["period"])),
                monthly_turn_on=int(rec["monthly_turn_on"]),
                avg_turn_on_monthly=float(rec["avg_turn_on_monthly"]),
                quarterly_turn_on=int(rec["quarterly_turn_on"]),
                avg_turn_on_quarterly=float(rec["avg_turn_on_quarterly"]),
                yearly_turn_on=int(rec["yearly_turn_on"]),
                yearly_avg_turn_on=float(rec["yearly_avg_turn_on"]),
                label=int(rec["label"]),
            ))
    return rows, codes


def load_experiment_data(ws: Workspace) -> ExperimentData:
    rows, codes = load_feature_rows(ws)
    return ExperimentData.from_rows(rows, codes, int(ws.config["scene_count"]))


def load_profiles(ws: Workspace) -> list[FrequencyProfile]:
    ws.require("routine")
    folder = ws.dir("routine")
    entities = json.loads((folder / "profiles_index.json").read_text())
    window = study_window(ws.config)
    day_count = (window[1] - window[0]).days + 1
    with np.load(folder / "profiles.npz") as npz:
        matrix = npz["profiles"].astype(np.float64)
    profiles = []
    for key, values in zip(entities, matrix):
        household, room = parse_entity_key(key)
        profiles.append(FrequencyProfile(household, room, values, day_count))
    return profiles


def stage_cluster(ws: Workspace) -> dict:
    profiles = load_profiles(ws)
    geo = load_geo(ws)
    cfg = ws.config["clustering"]
    out = ws.dir("cluster")

    countries = country_table(geo[p.household][1] for p in profiles)
    vectors = np.stack([
        build_cluster_vector(p, geo[p.household][1], countries).concat()
        for p in profiles
    ])
    result = select_k(vectors, range(int(cfg["k_min"]), int(cfg["k_max"]) + 1),
                      seed=derive_seed(ws.seed, "cluster"),
                      max_iter=int(cfg["max_iter"]), tol=float(cfg["tol"]),
                      n_init=int(cfg["n_init"]), threads=ws.threads)
    labels = result.model.labels_
    assignment = {(p.household, p.room): int(c) for p, c in zip(profiles, labels)}

    payload = {
        "format_version": 1,
        "config_hash": ws.config_hash,
        "k": result.k,
        "degenerate": result.degenerate,
        "countries": countries,
        "inertia_curve": [[k, inertia] for k, inertia in result.inertia_curve],
        "centroids": [[round(float(v), 12) for v in row] for row in result.model.centroids],
        "entities": [
            {"household": p.household, "room": p.room.value, "cluster": int(c)}
            for p, c in zip(profiles, labels)
        ],
    }
    (out / "clusters.json").write_text(json.dumps(payload, indent=1, sort_keys=True))

    with (out / "cdf.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["household", "room", "cluster", "usage", "cdf"])
        for row in cdf_rows(profiles, assignment):
            writer.writerow([row[0], row[1], row[2], f"{row[3]:.6f}", f"{row[4]:.6f}"])

    sizes = np.bincount(labels, minlength=result.k).tolist()
    ws.write_manifest("cluster", inputs=["routine/profiles.npz", "ingest/meta.json"],
                      k=result.k, sizes=sizes, degenerate=result.degenerate)
    return {"k": result.k, "sizes": sizes}


def load_cluster_assignment(ws: Workspace) -> tuple[dict[tuple[str, Room], int], dict]:
    ws.require("cluster")
    payload = json.loads((ws.dir("cluster") / "clusters.json").read_text())
    assignment = {(e["household"], Room(e["room"])): int(e["cluster"])
                  for e in payload["entities"]}
    return assignment, payload


def stage_train(ws: Workspace) -> dict:
    data = load_experiment_data(ws)
    cfg = ws.config["train"]
    out = ws.dir("train")
    (out / "models").mkdir(exist_ok=True)

    # Search on the train side of the same pooled split the eval stage uses.
    train_idx, _ = split_rows(data.n, float(ws.config["eval"]["test_frac"]),
                              derive_seed(ws.seed, "pooled-split"))
    cap = cfg["grid_rows_cap"]
    if cap is not None and train_idx.size > cap:
        rng = np.random.default_rng(derive_seed(ws.seed, "grid-cap"))
        search_idx = np.sort(rng.choice(train_idx, size=int(cap), replace=False))
    else:
        search_idx = train_idx
    search_set = data.dataset.subset(search_idx)
    fit_set = data.dataset.subset(train_idx)

    summary = {}
    for family, grid in sorted(cfg["grids"].items()):
        result = grid_search(family, grid, search_set, folds=int(cfg["folds"]),
                             seed=derive_seed(ws.seed, "grid", family),
                             threads=ws.threads)
        spec = result.best
        params = dict(spec.params)
        if family != "knn":
            params["seed"] = derive_seed(ws.seed, "train-fit", family)
        model = ModelSpec(family, params).build()
        model.fit(fit_set.X, fit_set.y, fit_set.class_count)
        model.feature_names = list(FEATURE_NAMES)
        (out / "models" / f"{family}.json").write_text(
            json.dumps(model_to_jsonable(model), sort_keys=True))
        summary[family] = {
            "best": spec.to_jsonable(),
            "search_rows": int(search_idx.size),
            "cv_table": result.cv_table,
        }
    (out / "search.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    ws.write_manifest("train", inputs=["features/features.csv"],
                      families=sorted(cfg["grids"]))
    return {"families": sorted(summary)}


def load_best_specs(ws: Workspace) -> dict[str, ModelSpec]:
    ws.require("train")
    summary = json.loads((ws.dir("train") / "search.json").read_text())
    return {family: ModelSpec.from_jsonable(info["best"])
            for family, info in summary.items()}


def _report_jsonable(report: MetricReport) -> dict:
    return {
        "accuracy": report.accuracy,
        "balanced_accuracy": report.balanced_accuracy,
        "per_class": [
            {"precision": pc.precision, "recall": pc.recall,
             "specificity": pc.specificity, "f1": pc.f1, "support": pc.support,
             "undefined": list(pc.undefined)}
            for pc in report.per_class
        ],
    }


def stage_eval_pooled(ws: Workspace) -> dict:
    data = load_experiment_data(ws)
    specs = load_best_specs(ws)
    out = ws.dir("eval-pooled")
    report = run_pooled_experiment(data, specs, seed=ws.seed,
                                   test_frac=float(ws.config["eval"]["test_frac"]),
                                   threads=ws.threads)

    with (out / "per_class.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        families = sorted(report.results)
        header = ["class"]
        for metric in ("precision", "recall", "f1"):
            header += [f"{metric}_{FAMILY_LABELS[f]}" for f in families]
        writer.writerow(header)
        class_count = data.dataset.class_count
        for c in range(class_count):
            row = [c]
            for metric in ("precision", "recall", "f1"):
                for family in families:
                    pc = report.results[family].report.per_class[c]
                    row.append(f"{getattr(pc, metric):.4f}")
            writer.writerow(row)

    with (out / "summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "accuracy", "balanced_accuracy"])
        for family in sorted(report.results):
            r = report.results[family].report
            writer.writerow([FAMILY_LABELS[family], f"{r.accuracy:.4f}",
                             f"{r.balanced_accuracy:.4f}"])

    payload = {
        "test_frac": report.test_frac,
        "n_train": report.n_train,
        "n_test": report.n_test,
        "families": {family: {"spec": result.spec.to_jsonable(),
                              "metrics": _report_jsonable(result.report)}
                     for family, result in report.results.items()},
    }
    ws.merge_results("pooled", payload)
    ws.write_manifest("eval-pooled", inputs=["features/features.csv", "train/search.json"])
    return {"accuracy": {f: r.report.accuracy for f, r in report.results.items()}}


def stage_eval_clustered(ws: Workspace) -> dict:
    data = load_experiment_data(ws)
    specs = load_best_specs(ws)
    assignment, _ = load_cluster_assignment(ws)
    family = ws.config["eval"]["clustered_family"]
    out = ws.dir("eval-clustered")
    report = run_clustered_experiment(data, assignment, specs[family], seed=ws.seed,
                                      test_frac=float(ws.config["eval"]["test_frac"]),
                                      threads=ws.threads)

    with (out / "table.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster", "balanced_accuracy", "accuracy", "population"])
        for result in report.clusters:
            writer.writerow([result.cluster, f"{result.report.balanced_accuracy:.4f}",
                             f"{result.report.accuracy:.4f}", result.population])
        writer.writerow(["weighted_average", f"{report.weighted.balanced_accuracy:.4f}",
                         f"{report.weighted.accuracy:.4f}",
                         sum(r.population for r in report.clusters)])

    payload = {
        "family": family,
        "weighting": report.weighting,
        "clusters": [
            {"cluster": r.cluster, "population": r.population, "n_train": r.n_train,
             "metrics": _report_jsonable(r.report)}
            for r in report.clusters
        ],
        "weighted_average": _report_jsonable(report.weighted),
        "skipped_clusters": report.skipped_clusters,
    }
    ws.merge_results("clustered", payload)
    ws.write_manifest("eval-clustered",
                      inputs=["features/features.csv", "train/search.json",
                              "cluster/clusters.json"])
    return {"weighted_accuracy": report.weighted.accuracy}


def stage_coldstart(ws: Workspace, scenarios=None, iterations=None,
                    clustered=None) -> dict:
    data = load_experiment_data(ws)
    cfg = ws.config["coldstart"]
    scenarios = [float(s) for s in (scenarios or cfg["scenarios"])]
    iterations = int(iterations if iterations is not None else cfg["iterations"])
    clustered = bool(cfg["clustered"] if clustered is None else clustered)
    spec = ModelSpec.from_jsonable(cfg["spec"])
    out = ws.dir("coldstart")

    assignment = None
    if clustered:
        assignment, _ = load_cluster_assignment(ws)

    report = run_cold_start(
        data, spec, assignment, scenarios=scenarios, iterations=iterations,
        folds=int(cfg["folds"]), seed=derive_seed(ws.seed, "coldstart"),
        train_rows_cap=cfg["train_rows_cap"], threads=ws.threads)

    with (out / "table.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["test_frac", "metric", "mean", "std"])
        for scenario in report.scenarios:
            cells = [("train_cv", scenario.train_cv), ("test_cv", scenario.test_cv),
                     ("independent", scenario.independent)]
            if scenario.clustered_cv is not None:
                cells.append(("clustered_cv_weighted", scenario.clustered_cv))
            for name, cell in cells:
                writer.writerow([scenario.test_frac, name,
                                 f"{cell.mean:.4f}", f"{cell.std:.4f}"])

    payload = {
        "spec": spec.to_jsonable(),
        "iterations": report.iterations,
        "folds": report.folds,
        "weighting": report.weighting,
        "train_rows_cap": report.train_rows_cap,
        "scenarios": [
            {
                "test_frac": s.test_frac,
                "train_cv": {"mean": s.train_cv.mean, "std": s.train_cv.std},
                "test_cv": {"mean": s.test_cv.mean, "std": s.test_cv.std},
                "independent": {"mean": s.independent.mean, "std": s.independent.std},
                "clustered_cv": (None if s.clustered_cv is None else
                                 {"mean": s.clustered_cv.mean, "std": s.clustered_cv.std}),
            }
            for s in report.scenarios
        ],
    }
    ws.merge_results("coldstart", payload)
    ws.write_manifest("coldstart", inputs=["features/features.csv"]
                      + (["cluster/clusters.json"] if clustered else []))
    return {"scenarios": len(report.scenarios)}


def stage_report(ws: Workspace) -> dict:
    """Plot-ready figure CSVs; refuses artifacts from mismatched configs."""
    out = ws.dir("report")
    present = []
    for stage in STAGES[:-1]:
        path = ws.manifest_path(stage)
        if path.exists():
            manifest = json.loads(path.read_text())
            if manifest["config_hash"] != ws.config_hash:
                raise ConfigHashMismatch(
                    f"stage {stage} was built under config {manifest['config_hash'][:12]}, "
                    f"current is {ws.config_hash[:12]}")
            present.append(stage)

    written = []

    if "routine" in present:
        profiles = load_profiles(ws)
        with (out / "usage_cutoff.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["household", "room", "rank", "frequency"])
            for profile in profiles[:6]:
                curve = np.sort(profile.values)[::-1]
                for rank, value in enumerate(curve):
                    writer.writerow([profile.household, profile.room.value,
                                     rank, f"{value:.6f}"])
        written.append("usage_cutoff.csv")

    if "cluster" in present:
        _, payload = load_cluster_assignment(ws)
        with (out / "inertia_curve.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "inertia"])
            for k, inertia in payload["inertia_curve"]:
                writer.writerow([k, f"{inertia:.6f}"])
        written.append("inertia_curve.csv")

    if "train" in present:
        model_path = ws.dir("train") / "models" / "random_forest.json"
        if model_path.exists():
            model = model_from_jsonable(json.loads(model_path.read_text()))
            ranked = compute_feature_importance(model, model.feature_names or FEATURE_NAMES)
            with (out / "feature_importance.csv").open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["feature", "importance"])
                for name, value in ranked:
                    writer.writerow([name, f"{value:.6f}"])
            written.append("feature_importance.csv")

    results_path = ws.results_path()
    if results_path.exists():
        results = json.loads(results_path.read_text())
        if "coldstart" in results:
            with (out / "coldstart_sampling.csv").open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["test_frac", "metric", "mean", "std"])
                for scenario in results["coldstart"]["scenarios"]:
                    for name in ("train_cv", "test_cv", "independent", "clustered_cv"):
                        cell = scenario.get(name)
                        if cell:
                            writer.writerow([scenario["test_frac"], name,
                                             f"{cell['mean']:.4f}", f"{cell['std']:.4f}"])
            written.append("coldstart_sampling.csv")

    ws.write_manifest("report", inputs=[f"{s}/manifest.json" for s in present],
                      figures=written)
    return {"figures": written, "stages_checked": present}


STAGE_RUNNERS = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "routine": stage_routine,
    "features": stage_features,
    "cluster": stage_cluster,
    "train": stage_train,
    "eval-pooled": stage_eval_pooled,
    "eval-clustered": stage_eval_clustered,
    "coldstart": stage_coldstart,
    "report": stage_report,
}
