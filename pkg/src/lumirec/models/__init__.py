"""From-scratch classifiers: KNN, random forest, gradient boosting, grid search."""

from .base import (
    FAMILIES,
    FAMILY_LABELS,
    GRADIENT_BOOST,
    KNN,
    RANDOM_FOREST,
    Dataset,
    ModelSpec,
    model_from_jsonable,
    model_to_jsonable,
)
from .boosting import GradientBoosting
from .forest import RandomForest
from .knn import KNearestNeighbors
from .search import GridSearchResult, expand_grid, fit_predict_accuracy, grid_search, kfold_indices
from .tree import DecisionTree, RegressionTree, bin_features

__all__ = [
    "FAMILIES",
    "FAMILY_LABELS",
    "GRADIENT_BOOST",
    "KNN",
    "RANDOM_FOREST",
    "Dataset",
    "ModelSpec",
    "DecisionTree",
    "RegressionTree",
    "GradientBoosting",
    "RandomForest",
    "KNearestNeighbors",
    "GridSearchResult",
    "bin_features",
    "expand_grid",
    "fit_predict_accuracy",
    "grid_search",
    "kfold_indices",
    "model_from_jsonable",
    "model_to_jsonable",
]
