"""Multi-class gradient boosting with softmax cross-entropy.

Each round fits one squared-error regression tree per class to the residual
(one-hot minus softmax probability); leaf values are Newton steps
sum(g) / (sum(h) + eps) scaled by the learning rate. Scores start at the
log class priors, so a zero learning rate predicts the prior argmax.
Training log-loss is recorded after every round.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import UntrainedModel
from ..util import derive_seed
from .base import GRADIENT_BOOST
from .tree import RegressionTree, TreeNodes, bin_features

_PRIOR_FLOOR = 1e-12


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


@dataclass
class GradientBoosting:
    n_trees: int = 50
    max_depth: int | None = 4
    learning_rate: float = 0.1
    min_leaf: int = 1
    seed: int = 0
    class_count: int = 0
    init_scores: np.ndarray | None = None
    rounds: list[list[RegressionTree]] = field(default_factory=list)
    train_loss_: list[float] = field(default_factory=list)
    importances_: np.ndarray | None = None
    feature_names: list[str] | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, class_count: int) -> "GradientBoosting":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        n = X.shape[0]
        self.class_count = class_count
        binned = bin_features(X)
        self.importances_ = np.zeros(binned.n_features)

        priors = np.bincount(y, minlength=class_count) / n
        self.init_scores = np.log(np.maximum(priors, _PRIOR_FLOOR))
        scores = np.tile(self.init_scores, (n, 1))
        onehot = np.zeros((n, class_count))
        onehot[np.arange(n), y] = 1.0

        self.rounds = []
        self.train_loss_ = []
        for m in range(self.n_trees):
            probs = _softmax(scores)
            round_trees: list[RegressionTree] = []
            for c in range(class_count):
                g = onehot[:, c] - probs[:, c]
                h = probs[:, c] * (1.0 - probs[:, c])
                rng = np.random.default_rng(derive_seed(self.seed, "round", m, c))
                tree = RegressionTree(max_depth=self.max_depth, min_leaf=self.min_leaf)
                tree.fit(binned, g, h, rng, self.importances_)
                round_trees.append(tree)
                scores[:, c] += self.learning_rate * tree.predict(X)
            self.rounds.append(round_trees)
            probs = _softmax(scores)
            picked = np.maximum(probs[np.arange(n), y], _PRIOR_FLOOR)
            self.train_loss_.append(float(-np.mean(np.log(picked))))
        return self

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        if self.init_scores is None:
            raise UntrainedModel("boosting model has not been fitted")
        X = np.asarray(X, dtype=np.float64)
        scores = np.tile(self.init_scores, (X.shape[0], 1))
        for round_trees in self.rounds:
            for c, tree in enumerate(round_trees):
                scores[:, c] += self.learning_rate * tree.predict(X)
        return scores

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_scores(X), axis=1)

    def to_jsonable(self) -> dict:
        return {
            "family": GRADIENT_BOOST,
            "params": {
                "n_trees": self.n_trees,
                "max_depth": self.max_depth,
                "learning_rate": self.learning_rate,
                "min_leaf": self.min_leaf,
                "seed": self.seed,
            },
            "class_count": self.class_count,
            "feature_names": self.feature_names,
            "init_scores": self.init_scores.tolist(),
            "train_loss": list(self.train_loss_),
            "rounds": [[tree.nodes.to_jsonable() for tree in round_trees]
                       for round_trees in self.rounds],
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "GradientBoosting":
        model = cls(**obj["params"])
        model.class_count = obj["class_count"]
        model.feature_names = obj.get("feature_names")
        model.init_scores = np.asarray(obj["init_scores"])
        model.train_loss_ = list(obj["train_loss"])
        model.rounds = []
        for round_obj in obj["rounds"]:
            trees = []
            for nodes_obj in round_obj:
                tree = RegressionTree()
                tree.nodes = TreeNodes.from_jsonable(nodes_obj)
                trees.append(tree)
            model.rounds.append(trees)
        return model
