"""Dataset container, model family specs, and JSON model persistence."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MODEL_FORMAT_VERSION = 1

KNN = "knn"
RANDOM_FOREST = "random_forest"
GRADIENT_BOOST = "gradient_boost"
FAMILIES = (KNN, RANDOM_FOREST, GRADIENT_BOOST)

FAMILY_LABELS = {KNN: "KNN", RANDOM_FOREST: "RF", GRADIENT_BOOST: "XGBoost"}


@dataclass
class Dataset:
    """Numeric design matrix with integer class labels."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    class_count: int

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y shapes disagree")
        if np.isnan(self.X).any():
            raise ValueError("dataset contains missing values")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.class_count):
            raise ValueError(f"labels outside [0, {self.class_count})")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def subset(self, idx: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.class_count)


@dataclass(frozen=True)
class ModelSpec:
    """A classifier family plus its hyperparameters."""

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")

    def build(self):
        from .boosting import GradientBoosting
        from .forest import RandomForest
        from .knn import KNearestNeighbors

        params = dict(self.params)
        if self.family == KNN:
            return KNearestNeighbors(**params)
        if self.family == RANDOM_FOREST:
            return RandomForest(**params)
        return GradientBoosting(**params)

    def tiebreak_key(self):
        """Ascending preference order used to resolve equal CV scores."""
        p = self.params
        depth = p.get("max_depth")
        return (
            p.get("n_trees", 0),
            float("inf") if depth is None else depth,
            p.get("n_neighbors", 0),
            sorted((k, repr(v)) for k, v in p.items()),
        )

    def to_jsonable(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "ModelSpec":
        return cls(family=obj["family"], params=dict(obj["params"]))


def model_to_jsonable(model) -> dict:
    """Versioned JSON form of any fitted model (round-trips via model_from_jsonable)."""
    payload = model.to_jsonable()
    payload["format_version"] = MODEL_FORMAT_VERSION
    return payload


def model_from_jsonable(obj: dict):
    from .boosting import GradientBoosting
    from .forest import RandomForest
    from .knn import KNearestNeighbors

    version = obj.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {version!r}")
    family = obj["family"]
    loaders = {
        KNN: KNearestNeighbors.from_jsonable,
        RANDOM_FOREST: RandomForest.from_jsonable,
        GRADIENT_BOOST: GradientBoosting.from_jsonable,
    }
    if family not in loaders:
        raise ValueError(f"unknown model family {family!r}")
    return loaders[family](obj)
