"""Evaluation protocol: splits, cross-validation, pooled/clustered runs, cold start.

The pooled experiment benchmarks every classifier family on a uniform row
split. The clustered experiment trains per usage cluster and reports the
row-weighted aggregate alongside per-cluster scores. Cold start reserves
whole households for testing across three scenario sizes, repeats each
scenario over seeded iterations, and optionally re-scores the held-out rows
within their nearest usage cluster.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InsufficientHouseholds
from .features import FeatureCodes, FeatureRow, rows_to_dataset
from .ingest import Room
from .metrics import MetricReport, confusion, metrics, weighted_cluster_aggregate
from .models import Dataset, ModelSpec, kfold_indices
from .util import derive_seed, parallel_map


@dataclass
class ExperimentData:
    """Feature rows encoded once, with per-row identity for entity-level splits."""

    dataset: Dataset
    households: np.ndarray               # per-row household id
    entities: list[tuple[str, Room]]     # per-row (household, room)

    @classmethod
    def from_rows(cls, rows: Sequence[FeatureRow], codes: FeatureCodes,
                  scene_count: int) -> "ExperimentData":
        dataset = rows_to_dataset(rows, codes, scene_count)
        households = np.array([r.household for r in rows], dtype=object)
        entities = [(r.household, r.room) for r in rows]
        return cls(dataset, households, entities)

    @property
    def n(self) -> int:
        return self.dataset.n


def split_rows(n: int, test_frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform disjoint covering row split with |test| = round(test_frac * n)."""
    if not 0.0 <= test_frac <= 1.0:
        raise ValueError(f"test_frac {test_frac} outside [0, 1]")
    count = int(round(test_frac * n))
    order = np.random.default_rng(seed).permutation(n)
    test = np.sort(order[:count])
    train = np.sort(order[count:])
    return train, test


def split_households(households: np.ndarray, test_frac: float,
                     seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Row split sampled at household level; no household straddles the sides."""
    unique = sorted(set(households))
    count = int(round(test_frac * len(unique)))
    if test_frac > 0 and count == 0:
        raise InsufficientHouseholds(
            f"{len(unique)} households cannot fill a {test_frac:.0%} test split")
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(np.array(unique, dtype=object), size=count, replace=False))
    mask = np.array([h in chosen for h in households])
    return np.flatnonzero(~mask), np.flatnonzero(mask)


def _seeded_spec(spec: ModelSpec, seed: int) -> ModelSpec:
    if spec.family == "knn":
        return spec
    return ModelSpec(spec.family, {**spec.params, "seed": seed})


def fit_and_score(spec: ModelSpec, train: Dataset, test: Dataset,
                  seed: int) -> tuple[np.ndarray, np.ndarray]:
    model = _seeded_spec(spec, seed).build()
    model.fit(train.X, train.y, train.class_count)
    return test.y, model.predict(test.X)


def cross_validate(spec: ModelSpec, data: Dataset, folds: int,
                   seed: int) -> tuple[float, float]:
    """Mean and population std of per-fold accuracy under stratified CV."""
    split = kfold_indices(data.y, folds, derive_seed(seed, "cv-folds"))
    accuracies = []
    for f, (tr, te) in enumerate(split):
        y_true, y_pred = fit_and_score(spec, data.subset(tr), data.subset(te),
                                       derive_seed(seed, "cv-fit", f))
        accuracies.append(float(np.mean(y_true == y_pred)))
    return float(np.mean(accuracies)), float(np.std(accuracies))


# --- pooled benchmark ---------------------------------------------------------

@dataclass
class FamilyResult:
    spec: ModelSpec
    report: MetricReport
    y_true: np.ndarray
    y_pred: np.ndarray


@dataclass
class PooledReport:
    results: dict[str, FamilyResult]
    test_frac: float
    n_train: int
    n_test: int


def run_pooled_experiment(data: ExperimentData, specs: dict[str, ModelSpec],
                          seed: int, test_frac: float = 0.1,
                          threads: int = 1) -> PooledReport:
    """Benchmark each family on one uniform train/test row split."""
    train_idx, test_idx = split_rows(data.n, test_frac, derive_seed(seed, "pooled-split"))
    train = data.dataset.subset(train_idx)
    test = data.dataset.subset(test_idx)

    def run(item):
        family, spec = item
        y_true, y_pred = fit_and_score(spec, train, test, derive_seed(seed, "pooled", family))
        report = metrics(confusion(y_true, y_pred, data.dataset.class_count))
        return family, FamilyResult(spec, report, y_true, y_pred)

    results = dict(parallel_map(run, sorted(specs.items()), threads))
    return PooledReport(results=results, test_frac=test_frac,
                        n_train=train.n, n_test=test.n)


# --- per-cluster experiment -----------------------------------------------------

@dataclass
class ClusterResult:
    cluster: int
    report: MetricReport
    population: int  # test rows carried into the weighted aggregate
    n_train: int


@dataclass
class ClusteredReport:
    clusters: list[ClusterResult]
    weighted: MetricReport
    weighting: str = "test-rows"
    skipped_clusters: list[int] = field(default_factory=list)


def run_clustered_experiment(data: ExperimentData,
                             cluster_of_entity: dict[tuple[str, Room], int],
                             spec: ModelSpec, seed: int, test_frac: float = 0.1,
                             threads: int = 1) -> ClusteredReport:
    """Train and evaluate within each cluster, then aggregate by test rows."""
    cluster_of_row = np.array([cluster_of_entity[e] for e in data.entities])
    results: list[ClusterResult] = []
    skipped: list[int] = []
    for cluster in sorted(set(cluster_of_row.tolist())):
        rows = np.flatnonzero(cluster_of_row == cluster)
        tr, te = split_rows(rows.size, test_frac,
                            derive_seed(seed, "cluster-split", cluster))
        if tr.size == 0 or te.size == 0:
            skipped.append(cluster)
            continue
        y_true, y_pred = fit_and_score(
            spec, data.dataset.subset(rows[tr]), data.dataset.subset(rows[te]),
            derive_seed(seed, "cluster-fit", cluster))
        report = metrics(confusion(y_true, y_pred, data.dataset.class_count))
        results.append(ClusterResult(cluster=int(cluster), report=report,
                                     population=int(te.size), n_train=int(tr.size)))
    weighted = weighted_cluster_aggregate([(r.report, r.population) for r in results])
    return ClusteredReport(clusters=results, weighted=weighted, skipped_clusters=skipped)


# --- cold start ------------------------------------------------------------------

@dataclass
class ColdStartCell:
    mean: float
    std: float


@dataclass
class ColdStartScenario:
    test_frac: float
    train_cv: ColdStartCell
    test_cv: ColdStartCell
    independent: ColdStartCell
    clustered_cv: ColdStartCell | None = None


@dataclass
class ColdStartReport:
    scenarios: list[ColdStartScenario]
    iterations: int
    folds: int
    weighting: str = "test-rows"
    train_rows_cap: int | None = None


def _cap_rows(idx: np.ndarray, cap: int | None, seed: int) -> np.ndarray:
    if cap is None or idx.size <= cap:
        return idx
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(idx, size=cap, replace=False))


def run_cold_start(data: ExperimentData, spec: ModelSpec,
                   cluster_of_entity: dict[tuple[str, Room], int] | None,
                   scenarios: Sequence[float] = (0.10, 0.25, 0.40),
                   iterations: int = 20, folds: int = 5, seed: int = 0,
                   train_rows_cap: int | None = None,
                   threads: int = 1) -> ColdStartReport:
    """Household-disjoint evaluation across test-share scenarios.

    Per iteration: cross-validation accuracy inside the train rows, inside
    the held-out rows, and a train-on-train / predict-on-test independent
    accuracy. With a cluster map, held-out rows are additionally
    cross-validated within their cluster and averaged weighted by rows.
    ``train_rows_cap`` bounds the train-side CV/fit sample (seeded) to keep
    repeated iterations affordable.
    """
    cluster_of_row = None
    if cluster_of_entity is not None:
        cluster_of_row = np.array([cluster_of_entity[e] for e in data.entities])

    def one_iteration(task):
        test_frac, iteration = task
        dseed = derive_seed(seed, "coldstart", test_frac, iteration)
        train_idx, test_idx = split_households(data.households, test_frac, dseed)
        train_set = set(data.households[train_idx])
        test_set = set(data.households[test_idx])
        assert not train_set & test_set, "household leak across cold-start split"
        capped = _cap_rows(train_idx, train_rows_cap, derive_seed(dseed, "cap"))
        train = data.dataset.subset(capped)
        test = data.dataset.subset(test_idx)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            train_cv = cross_validate(spec, train, folds, derive_seed(dseed, "train-cv"))[0]
            test_cv = cross_validate(spec, test, folds, derive_seed(dseed, "test-cv"))[0]
            y_true, y_pred = fit_and_score(spec, train, test, derive_seed(dseed, "fit"))
            independent = float(np.mean(y_true == y_pred))
            clustered = None
            if cluster_of_row is not None:
                parts = []
                for cluster in sorted(set(cluster_of_row[test_idx].tolist())):
                    rows = test_idx[cluster_of_row[test_idx] == cluster]
                    if rows.size < folds:
                        continue
                    acc = cross_validate(spec, data.dataset.subset(rows), folds,
                                         derive_seed(dseed, "clustered-cv", cluster))[0]
                    parts.append((acc, rows.size))
                if parts:
                    weights = np.array([w for _, w in parts], dtype=float)
                    clustered = float(np.dot([a for a, _ in parts], weights) / weights.sum())
        return train_cv, test_cv, independent, clustered

    report = ColdStartReport(scenarios=[], iterations=iterations, folds=folds,
                             train_rows_cap=train_rows_cap)
    for test_frac in scenarios:
        tasks = [(test_frac, i) for i in range(iterations)]
        outcomes = parallel_map(one_iteration, tasks, threads)
        train_cvs, test_cvs, independents, clustereds = zip(*outcomes)

        def cell(values) -> ColdStartCell:
            return ColdStartCell(mean=float(np.mean(values)), std=float(np.std(values)))

        clustered_cell = None
        if cluster_of_entity is not None:
            present = [c for c in clustereds if c is not None]
            if present:
                clustered_cell = cell(present)
        report.scenarios.append(ColdStartScenario(
            test_frac=float(test_frac),
            train_cv=cell(train_cvs),
            test_cv=cell(test_cvs),
            independent=cell(independents),
            clustered_cv=clustered_cell,
        ))
    return report
