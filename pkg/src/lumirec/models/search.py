"""Stratified k-fold cross-validation and hyperparameter grid search."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from ..util import derive_seed, parallel_map
from .base import Dataset, ModelSpec

# Canonical search lattices; pipelines may trim them for runtime.
DEFAULT_GRIDS = {
    "random_forest": {"n_trees": [50, 100, 200], "max_depth": [4, 8, 16, None]},
    "gradient_boost": {"n_trees": [50, 100, 200], "max_depth": [4, 8, 16, None],
                       "learning_rate": [0.1, 0.3]},
    "knn": {"n_neighbors": [3, 5, 11, 25]},
}


def kfold_indices(y: np.ndarray, folds: int, seed: int,
                  stratified: bool = True) -> list[tuple[np.ndarray, np.ndarray]]:
    """(train_idx, test_idx) pairs; stratified unless a class is rarer than folds.

    When stratification is impossible it downgrades to a plain shuffled
    split with a warning, as small per-cluster subsets routinely hit
    singleton classes.
    """
    y = np.asarray(y)
    n = y.shape[0]
    if not 2 <= folds <= n:
        raise ValueError(f"folds={folds} out of range for n={n}")
    rng = np.random.default_rng(seed)
    if stratified:
        counts = np.bincount(y)
        rare = counts[(counts > 0) & (counts < folds)]
        if rare.size:
            warnings.warn(
                f"{rare.size} class(es) rarer than {folds} folds; "
                "downgrading to a non-stratified split")
            stratified = False
    assignment = np.empty(n, dtype=np.int64)
    if stratified:
        for cls in np.unique(y):
            members = np.flatnonzero(y == cls)
            members = members[rng.permutation(members.size)]
            assignment[members] = np.arange(members.size) % folds
    else:
        assignment[rng.permutation(n)] = np.arange(n) % folds
    out = []
    for f in range(folds):
        test = np.flatnonzero(assignment == f)
        train = np.flatnonzero(assignment != f)
        out.append((train, test))
    return out


def fit_predict_accuracy(spec: ModelSpec, train: Dataset, test: Dataset,
                         seed: int | None = None) -> float:
    params = dict(spec.params)
    if seed is not None and spec.family != "knn":
        params["seed"] = seed
    model = ModelSpec(spec.family, params).build()
    model.fit(train.X, train.y, train.class_count)
    return float(np.mean(model.predict(test.X) == test.y))


@dataclass
class GridSearchResult:
    best: ModelSpec
    cv_table: list[dict]  # one row per (grid point, fold)
    mean_accuracy: dict  # canonical param repr -> mean accuracy


def expand_grid(family: str, grid: dict[str, list]) -> list[ModelSpec]:
    """Cartesian product of the lattice, in key order."""
    keys = list(grid.keys())
    specs = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        specs.append(ModelSpec(family, dict(zip(keys, combo))))
    return specs


def grid_search(family: str, grid: dict[str, list], train: Dataset,
                folds: int, seed: int, threads: int = 1) -> GridSearchResult:
    """Best spec by mean stratified-CV accuracy.

    Equal means break toward fewer trees, then smaller depth, then smaller
    neighbour count, then lexicographic parameters.
    """
    if not grid:
        raise ValueError("empty parameter grid")
    specs = expand_grid(family, grid)
    split = kfold_indices(train.y, folds, derive_seed(seed, "grid-folds"))
    tasks = [(pi, fi) for pi in range(len(specs)) for fi in range(folds)]

    def run(task):
        pi, fi = task
        tr, te = split[fi]
        accuracy = fit_predict_accuracy(
            specs[pi], train.subset(tr), train.subset(te),
            seed=derive_seed(seed, "grid-fit", pi, fi))
        return accuracy

    accuracies = parallel_map(run, tasks, threads)
    cv_table = [
        {"params": dict(specs[pi].params), "fold": fi, "accuracy": acc}
        for (pi, fi), acc in zip(tasks, accuracies)
    ]
    means = {}
    for pi, spec in enumerate(specs):
        rows = [acc for (qi, _), acc in zip(tasks, accuracies) if qi == pi]
        means[pi] = float(np.mean(rows))
    ranked = sorted(range(len(specs)),
                    key=lambda pi: (-means[pi], specs[pi].tiebreak_key()))
    best = specs[ranked[0]]
    return GridSearchResult(
        best=best,
        cv_table=cv_table,
        mean_accuracy={repr(sorted(specs[pi].params.items())): means[pi]
                       for pi in range(len(specs))},
    )
