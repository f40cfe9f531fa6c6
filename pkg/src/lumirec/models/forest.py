"""Random forest: bagged Gini trees voting by majority."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import UntrainedModel
from ..util import derive_seed, parallel_map
from .base import RANDOM_FOREST
from .tree import BinnedMatrix, DecisionTree, TreeNodes, bin_features


@dataclass
class RandomForest:
    """Bootstrap-aggregated CART ensemble.

    Each tree trains on n draws with replacement (unless ``bootstrap`` is
    off) with a per-node random feature subset of ceil(sqrt(p)). Features
    are binned once on the full training set and shared across trees; the
    candidate-cut pool is identical, only row samples differ. Votes tie
    toward the lowest class id.
    """

    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    bootstrap: bool = True
    seed: int = 0
    trees: list[DecisionTree] = field(default_factory=list)
    class_count: int = 0
    feature_names: list[str] | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, class_count: int,
            threads: int = 1) -> "RandomForest":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        self.class_count = class_count
        binned = bin_features(X)
        n = X.shape[0]
        subset = max(1, math.ceil(math.sqrt(binned.n_features)))

        def fit_tree(index: int) -> DecisionTree:
            tree = DecisionTree(
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                feature_subset_size=subset,
                seed=derive_seed(self.seed, "tree", index),
            )
            if self.bootstrap:
                rng = np.random.default_rng(derive_seed(self.seed, "bootstrap", index))
                rows = rng.integers(0, n, size=n)
                sample = BinnedMatrix(binned.codes[rows], binned.cuts, binned.n_bins)
                return tree.fit(None, y[rows], class_count, binned=sample)
            return tree.fit(None, y, class_count, binned=binned)

        self.trees = parallel_map(fit_tree, range(self.n_trees), threads)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        votes = self.vote_counts(X)
        return np.argmax(votes, axis=1)  # first max = lowest class id

    def vote_counts(self, X: np.ndarray) -> np.ndarray:
        """(n, C) tally of individual tree predictions."""
        if not self.trees:
            raise UntrainedModel("forest has no trees")
        X = np.asarray(X, dtype=np.float64)
        counts = np.zeros((X.shape[0], self.class_count), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            counts[rows, tree.predict(X)] += 1
        return counts

    @property
    def importances_(self) -> np.ndarray:
        """Mean impurity decrease per feature across trees (unnormalized)."""
        if not self.trees:
            raise UntrainedModel("forest has no trees")
        return np.mean([tree.importances_ for tree in self.trees], axis=0)

    def to_jsonable(self) -> dict:
        return {
            "family": RANDOM_FOREST,
            "params": {
                "n_trees": self.n_trees,
                "max_depth": self.max_depth,
                "min_leaf": self.min_leaf,
                "bootstrap": self.bootstrap,
                "seed": self.seed,
            },
            "class_count": self.class_count,
            "feature_names": self.feature_names,
            "trees": [
                {"nodes": t.nodes.to_jsonable(), "importances": t.importances_.tolist()}
                for t in self.trees
            ],
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "RandomForest":
        model = cls(**obj["params"])
        model.class_count = obj["class_count"]
        model.feature_names = obj.get("feature_names")
        model.trees = []
        for item in obj["trees"]:
            tree = DecisionTree()
            tree.nodes = TreeNodes.from_jsonable(item["nodes"], value_dtype=np.int64)
            tree.importances_ = np.asarray(item["importances"])
            tree.class_count = model.class_count
            model.trees.append(tree)
        return model
