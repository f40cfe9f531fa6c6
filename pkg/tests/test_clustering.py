"""Clustering tests: winsorization, k-means, k selection, assignment, CDFs."""

import numpy as np
import pytest

from lumirec.errors import DimensionMismatch, TooFewPoints
from lumirec.ingest import Room
from lumirec.metrics import adjusted_rand_index
from lumirec.routine import FrequencyProfile
from lumirec.clustering import (
    assign_cluster,
    assign_many,
    build_cluster_vector,
    cdf_rows,
    country_table,
    kmeans_fit,
    select_k,
    winsorize,
)


def blobs(seed=0, n_per=40, centers=((0, 0), (10, 10), (-10, 10)), spread=0.5):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(c, spread, size=(n_per, 2)) for c in centers])
    labels = np.repeat(np.arange(len(centers)), n_per)
    return X, labels


class TestClusterVector:
    def make_profile(self, values, room=Room.ROOM1):
        return FrequencyProfile("h1", room, np.asarray(values, float), 10)

    def test_constant_profile_unchanged(self):
        values = np.full(1440, 0.4)
        vec = build_cluster_vector(self.make_profile(values), "US", ["DE", "US"])
        assert (vec.usage == 0.4).all()

    def test_lone_spike_clamped_to_zero(self):
        values = np.zeros(1440)
        values[700] = 1.0
        vec = build_cluster_vector(self.make_profile(values), "US", ["US"])
        assert vec.usage[700] == 0.0

    def test_onehots(self):
        values = np.linspace(0, 1, 1440)
        vec = build_cluster_vector(self.make_profile(values, Room.ROOM1), "US",
                                   ["BR", "DE", "US"])
        assert vec.country_onehot.tolist() == [0.0, 0.0, 1.0]
        assert vec.room_onehot.tolist() == [1.0, 0.0]
        assert vec.concat().shape == (1440 + 3 + 2,)

    def test_winsor_band(self):
        rng = np.random.default_rng(1)
        values = rng.uniform(0, 1, 1440)
        lo, hi = np.quantile(values, [0.15, 0.85])
        w = winsorize(values)
        assert w.min() >= lo and w.max() <= hi
        inside = (values >= lo) & (values <= hi)
        assert (w[inside] == values[inside]).all()

    def test_country_table_sorted_unique(self):
        assert country_table(["US", "DE", "US", "BR"]) == ["BR", "DE", "US"]


class TestKMeans:
    def test_k1_centroid_is_mean(self):
        X, _ = blobs(seed=3)
        model = kmeans_fit(X, 1, seed=0, n_init=2)
        assert np.allclose(model.centroids[0], X.mean(axis=0))
        expected = ((X - X.mean(axis=0)) ** 2).sum()
        assert model.inertia == pytest.approx(expected)

    def test_three_blobs_exact_recovery(self):
        X, truth = blobs(seed=4)
        model = kmeans_fit(X, 3, seed=1)
        assert adjusted_rand_index(truth, model.labels_) == 1.0

    def test_k_equals_n_zero_inertia(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(12, 3))
        model = kmeans_fit(X, 12, seed=2)
        assert model.inertia == pytest.approx(0.0, abs=1e-9)

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            kmeans_fit(np.zeros((3, 2)), 5, seed=0)

    def test_seed_reproducibility_bit_identical(self):
        X, _ = blobs(seed=6)
        a = kmeans_fit(X, 3, seed=9)
        b = kmeans_fit(X, 3, seed=9)
        assert np.array_equal(a.centroids, b.centroids)
        assert np.array_equal(a.labels_, b.labels_)
        assert a.inertia == b.inertia

    def test_thread_count_invariance(self):
        X, _ = blobs(seed=7)
        serial = kmeans_fit(X, 3, seed=4, threads=1)
        pooled = kmeans_fit(X, 3, seed=4, threads=4)
        assert np.array_equal(serial.centroids, pooled.centroids)
        assert serial.inertia == pooled.inertia

    def test_fit_labels_match_assign(self):
        X, _ = blobs(seed=8)
        model = kmeans_fit(X, 3, seed=5)
        for i in range(X.shape[0]):
            assert assign_cluster(model, X[i]) == model.labels_[i]
        assert np.array_equal(assign_many(model, X), model.labels_)


class TestSelectK:
    def test_three_blobs_selects_three(self):
        X, _ = blobs(seed=10, n_per=50)
        result = select_k(X, range(1, 11), seed=0, n_init=4)
        assert result.k == 3
        assert not result.degenerate
        assert [k for k, _ in result.inertia_curve] == list(range(1, 11))

    def test_single_blob_falls_back_to_smallest_k(self):
        # High-dimensional noise at realistic n gives the near-flat inertia
        # curve a lone persona produces; no elbow exists.
        rng = np.random.default_rng(11)
        X = rng.normal(size=(600, 100))
        result = select_k(X, range(1, 9), seed=1, n_init=2)
        assert result.degenerate
        assert result.k == 1

    def test_singleton_range(self):
        X, _ = blobs(seed=12)
        result = select_k(X, [2], seed=2, n_init=2)
        assert result.k == 2

    def test_out_of_range_k(self):
        X, _ = blobs(seed=13, n_per=2)
        with pytest.raises(ValueError):
            select_k(X, range(1, 100), seed=0)


class TestAssignCluster:
    def test_point_on_centroid(self):
        X, _ = blobs(seed=14)
        model = kmeans_fit(X, 3, seed=3)
        for c in range(3):
            assert assign_cluster(model, model.centroids[c]) == c

    def test_midpoint_tie_goes_to_lower_id(self):
        model = kmeans_fit(np.array([[0.0, 0.0], [2.0, 0.0]]), 2, seed=0, n_init=1)
        lo = model.centroids.sum(axis=1).argmin()
        mid = model.centroids.mean(axis=0)
        assert assign_cluster(model, mid) == min(0, 1)

    def test_dimension_mismatch(self):
        X, _ = blobs(seed=15)
        model = kmeans_fit(X, 2, seed=0, n_init=1)
        with pytest.raises(DimensionMismatch):
            assign_cluster(model, np.zeros(5))
        with pytest.raises(DimensionMismatch):
            assign_many(model, np.zeros((4, 5)))


class TestCdfRows:
    def test_constant_profile_step(self):
        prof = FrequencyProfile("h", Room.ROOM1, np.full(1440, 0.5), 5)
        rows = cdf_rows([prof], {("h", Room.ROOM1): 0})
        xs = np.array([r[3] for r in rows])
        fs = np.array([r[4] for r in rows])
        assert fs[xs < 0.5].max(initial=0.0) == 0.0
        assert (fs[xs >= 0.5] == 1.0).all()

    def test_uniform_profile_linear(self):
        values = np.linspace(0, 1, 1440)
        prof = FrequencyProfile("h", Room.ROOM2, values, 5)
        rows = cdf_rows([prof], {("h", Room.ROOM2): 1})
        xs = np.array([r[3] for r in rows])
        fs = np.array([r[4] for r in rows])
        assert np.abs(fs - xs).max() < 0.01

    def test_row_shape_and_tagging(self):
        prof = FrequencyProfile("h", Room.ROOM1, np.zeros(1440), 5)
        rows = cdf_rows([prof], {("h", Room.ROOM1): 2}, points=50)
        assert len(rows) == 50
        assert all(r[0] == "h" and r[1] == "room1" and r[2] == 2 for r in rows)
