"""User segmentation: winsorized usage vectors, k-means, and elbow k selection.

Each (household, room) entity becomes a 1440-minute usage vector clamped to
its own 15th/85th percentile band, concatenated with country and room-type
one-hots. Lloyd's algorithm with k-means++ seeding fits the clusters; the
number of clusters comes from the knee of the inertia curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, TooFewPoints
from .ingest import Room
from .routine import FrequencyProfile, knee_threshold
from .util import derive_seed, parallel_map

WINSOR_LOW = 0.15
WINSOR_HIGH = 0.85
DEFAULT_N_INIT = 10
DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6
# Inertia must drop by at least this fraction across the k range for a knee
# to be meaningful. Structureless data loses only a few percent per extra
# centroid while genuine clusters drop tens of percent by the elbow.
MIN_RELATIVE_DROP = 0.2

ROOM_ORDER = (Room.ROOM1, Room.ROOM2)


@dataclass
class ClusterVector:
    entity: tuple[str, Room]
    usage: np.ndarray
    country_onehot: np.ndarray
    room_onehot: np.ndarray

    def concat(self) -> np.ndarray:
        return np.concatenate([self.usage, self.country_onehot, self.room_onehot])


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    inertia: float
    seed: int
    iterations_run: int
    labels_: np.ndarray | None = None


def winsorize(values: np.ndarray, low: float = WINSOR_LOW, high: float = WINSOR_HIGH) -> np.ndarray:
    """Clamp a vector to its own empirical [low, high] quantile band."""
    lo, hi = np.quantile(values, [low, high])
    return np.clip(values, lo, hi)


def country_table(countries) -> list[str]:
    """Fitted country code order for one-hot encoding (sorted unique)."""
    return sorted(set(countries))


def build_cluster_vector(profile: FrequencyProfile, country: str,
                         countries: list[str]) -> ClusterVector:
    """Winsorized usage plus geography/room one-hots for one entity."""
    country_onehot = np.zeros(len(countries))
    if country in countries:
        country_onehot[countries.index(country)] = 1.0
    room_onehot = np.zeros(len(ROOM_ORDER))
    room_onehot[ROOM_ORDER.index(profile.room)] = 1.0
    return ClusterVector(
        entity=(profile.household, profile.room),
        usage=winsorize(profile.values),
        country_onehot=country_onehot,
        room_onehot=room_onehot,
    )


def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)  # all points coincide with chosen centroids
        centroids[i] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _assign(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((X * X).sum(axis=1)[:, None]
          + (centroids * centroids).sum(axis=1)
          - 2.0 * X @ centroids.T)
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)  # first min = lowest cluster id
    return labels, d2[np.arange(X.shape[0]), labels]


def _lloyd(X: np.ndarray, k: int, seed: int, max_iter: int, tol: float) -> KMeansModel:
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(X, k, rng)
    labels, dist = _assign(X, centroids)
    inertia = float(dist.sum())
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new_centroids = centroids.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centroids[c] = X[members].mean(axis=0)
        labels, dist = _assign(X, new_centroids)
        # Empty clusters reseed to the point farthest from its centroid.
        for c in range(k):
            if not (labels == c).any():
                new_centroids[c] = X[np.argmax(dist)]
                labels, dist = _assign(X, new_centroids)
        new_inertia = float(dist.sum())
        assert new_inertia <= inertia * (1 + 1e-9) + 1e-12, \
            f"inertia increased: {inertia} -> {new_inertia}"
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum()))
        centroids = new_centroids
        inertia = new_inertia
        if shift < tol:
            break
    return KMeansModel(k=k, centroids=centroids, inertia=inertia, seed=seed,
                       iterations_run=iterations, labels_=labels)


def kmeans_fit(X: np.ndarray, k: int, seed: int,
               max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
               n_init: int = DEFAULT_N_INIT, threads: int = 1) -> KMeansModel:
    """Best of ``n_init`` k-means++ Lloyd runs by inertia (ties: lowest run)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < k:
        raise TooFewPoints(f"{X.shape[0]} points for k={k}")
    if k < 1:
        raise ValueError("k must be >= 1")
    runs = parallel_map(
        lambda r: _lloyd(X, k, derive_seed(seed, "kmeans", k, r), max_iter, tol),
        range(n_init), threads)
    best = min(range(n_init), key=lambda r: (runs[r].inertia, r))
    model = runs[best]
    model.seed = seed
    return model


@dataclass
class SelectKResult:
    k: int
    inertia_curve: list[tuple[int, float]]
    model: KMeansModel
    degenerate: bool = False


def select_k(X: np.ndarray, k_range, seed: int,
             max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
             n_init: int = DEFAULT_N_INIT, threads: int = 1) -> SelectKResult:
    """Fit every k in range and keep the knee of the inertia curve.

    A near-flat curve (relative drop below MIN_RELATIVE_DROP) or a collinear
    one has no meaningful elbow; those fall back to the smallest k with
    ``degenerate=True``.
    """
    ks = sorted(int(k) for k in k_range)
    if not ks or ks[0] < 1 or ks[-1] > X.shape[0]:
        raise ValueError(f"k range {ks} outside [1, {X.shape[0]}]")
    models = parallel_map(
        lambda k: kmeans_fit(X, k, seed, max_iter, tol, n_init, threads=1),
        ks, threads)
    inertias = np.array([m.inertia for m in models])
    curve = list(zip(ks, (float(v) for v in inertias)))
    if len(ks) == 1:
        return SelectKResult(ks[0], curve, models[0])
    monotone = np.minimum.accumulate(inertias)
    if monotone[0] <= 0 or (monotone[0] - monotone[-1]) <= MIN_RELATIVE_DROP * monotone[0]:
        return SelectKResult(ks[0], curve, models[0], degenerate=True)
    knee = knee_threshold(monotone)
    if knee.degenerate:
        return SelectKResult(ks[0], curve, models[0], degenerate=True)
    return SelectKResult(ks[knee.knee_index], curve, models[knee.knee_index])


def assign_cluster(model: KMeansModel, vector: np.ndarray) -> int:
    """Nearest-centroid id for one vector (ties toward the lower id)."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (model.centroids.shape[1],):
        raise DimensionMismatch(
            f"vector dim {vector.shape} vs centroids {model.centroids.shape[1]}")
    d2 = ((model.centroids - vector) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def assign_many(model: KMeansModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != model.centroids.shape[1]:
        raise DimensionMismatch(
            f"matrix dim {X.shape[1]} vs centroids {model.centroids.shape[1]}")
    labels, _ = _assign(X, model.centroids)
    return labels


def cdf_rows(profiles: list[FrequencyProfile], assignment: dict[tuple[str, Room], int],
             points: int = 100) -> list[tuple[str, str, int, float, float]]:
    """Empirical usage CDFs sampled at evenly spaced abscissae over [0, 1].

    One row per (entity, abscissa): (household, room, cluster, x, F(x)).
    """
    xs = np.linspace(0.0, 1.0, points)
    rows = []
    for profile in profiles:
        cluster = assignment[(profile.household, profile.room)]
        values = np.sort(profile.values)
        cdf = np.searchsorted(values, xs, side="right") / values.size
        for x, f in zip(xs, cdf):
            rows.append((profile.household, profile.room.value, int(cluster),
                         float(x), float(f)))
    return rows
