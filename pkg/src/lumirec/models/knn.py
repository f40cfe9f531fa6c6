"""k-nearest-neighbours classifier with explicit tie rules.

Distances are Euclidean over standardized features (zero-variance features
dropped). Distance ties resolve to the lower training-row index and vote
ties to the lowest class id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import KTooLarge, UntrainedModel
from .base import KNN

_CHUNK = 512
_POOL_PAD = 64


@dataclass
class KNearestNeighbors:
    n_neighbors: int = 5
    class_count: int = 0
    feature_names: list[str] | None = None

    def __post_init__(self):
        self._train: np.ndarray | None = None
        self._labels: np.ndarray | None = None
        self._mean: np.ndarray | None = None
        self._scale: np.ndarray | None = None
        self._keep: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, class_count: int) -> "KNearestNeighbors":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if not 1 <= self.n_neighbors <= X.shape[0]:
            raise KTooLarge(f"k={self.n_neighbors} with {X.shape[0]} training rows")
        self.class_count = class_count
        self._mean = X.mean(axis=0)
        std = X.std(axis=0)
        self._keep = std > 0.0
        self._scale = np.where(self._keep, std, 1.0)
        self._train = ((X - self._mean) / self._scale)[:, self._keep]
        self._labels = y
        return self

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        return ((np.asarray(X, dtype=np.float64) - self._mean) / self._scale)[:, self._keep]

    def kneighbors(self, X: np.ndarray) -> np.ndarray:
        """Indices of the k nearest training rows per query, tie-exact."""
        if self._train is None:
            raise UntrainedModel("knn has no training data")
        queries = self._standardize(X)
        train = self._train
        k = self.n_neighbors
        n_train = train.shape[0]
        train_sq = (train * train).sum(axis=1)
        out = np.empty((queries.shape[0], k), dtype=np.int64)
        for lo in range(0, queries.shape[0], _CHUNK):
            chunk = queries[lo:lo + _CHUNK]
            d2 = (chunk * chunk).sum(axis=1)[:, None] + train_sq - 2.0 * (chunk @ train.T)
            if n_train <= k + _POOL_PAD:
                pool = np.broadcast_to(np.arange(n_train), (chunk.shape[0], n_train)).copy()
            else:
                pool = np.argpartition(d2, k + _POOL_PAD - 1, axis=1)[:, : k + _POOL_PAD]
                pool.sort(axis=1)  # ascending indices, so stable sort keeps the tie rule
            rows = np.arange(chunk.shape[0])[:, None]
            order = np.argsort(d2[rows, pool], axis=1, kind="stable")[:, :k]
            picked = pool[rows, order]
            # A tie at the pool boundary can hide closer-indexed rows outside
            # the pool; redo those rows exactly.
            if pool.shape[1] > k:
                pool_d = d2[rows, pool]
                kth = np.take_along_axis(pool_d, order[:, k - 1:k], axis=1)[:, 0]
                boundary = pool_d.max(axis=1) <= kth
                for r in np.flatnonzero(boundary):
                    full = np.lexsort((np.arange(n_train), d2[r]))
                    picked[r] = full[:k]
            out[lo:lo + _CHUNK] = picked
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        neighbors = self.kneighbors(X)
        votes = self._labels[neighbors]
        counts = np.zeros((votes.shape[0], self.class_count), dtype=np.int64)
        rows = np.arange(votes.shape[0])
        for col in range(votes.shape[1]):
            counts[rows, votes[:, col]] += 1
        return np.argmax(counts, axis=1)  # first max = lowest class id

    def to_jsonable(self) -> dict:
        return {
            "family": KNN,
            "params": {"n_neighbors": self.n_neighbors},
            "class_count": self.class_count,
            "feature_names": self.feature_names,
            "train": self._train.tolist(),
            "labels": self._labels.tolist(),
            "mean": self._mean.tolist(),
            "scale": self._scale.tolist(),
            "keep": self._keep.tolist(),
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "KNearestNeighbors":
        model = cls(**obj["params"])
        model.class_count = obj["class_count"]
        model.feature_names = obj.get("feature_names")
        model._train = np.asarray(obj["train"], dtype=np.float64)
        model._labels = np.asarray(obj["labels"], dtype=np.int64)
        model._mean = np.asarray(obj["mean"], dtype=np.float64)
        model._scale = np.asarray(obj["scale"], dtype=np.float64)
        model._keep = np.asarray(obj["keep"], dtype=bool)
        return model
