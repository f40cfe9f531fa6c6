"""Classifier tests.

The decision-tree engine is checked against a deliberately slow reference
CART (exhaustive splits, explicit recursion, same published tie rules), and
KNN against an explicit lexsort oracle.
"""

import numpy as np
import pytest

from lumirec.errors import KTooLarge, UntrainedModel
from lumirec.models import (
    Dataset,
    DecisionTree,
    GradientBoosting,
    KNearestNeighbors,
    ModelSpec,
    RandomForest,
    grid_search,
    kfold_indices,
    model_from_jsonable,
    model_to_jsonable,
)

EPS = 1e-12


# --- reference implementations ---------------------------------------------

def gini(y, class_count):
    if len(y) == 0:
        return 0.0
    counts = np.bincount(y, minlength=class_count)
    frac = counts / len(y)
    return 1.0 - np.sum(frac * frac)


def reference_tree(X, y, class_count, max_depth, min_leaf):
    """Exhaustive CART with the same tie rules, grown by plain recursion."""

    def majority(labels):
        return int(np.argmax(np.bincount(labels, minlength=class_count)))

    def build(rows, depth):
        labels = y[rows]
        if (len(np.unique(labels)) == 1
                or (max_depth is not None and depth >= max_depth)
                or len(rows) < 2 * min_leaf):
            return ("leaf", majority(labels))
        best = None  # (score, feature, threshold)
        for j in range(X.shape[1]):
            uniq = np.unique(X[rows, j])
            for t in (uniq[:-1] + uniq[1:]) / 2.0:
                left = rows[X[rows, j] <= t]
                right = rows[X[rows, j] > t]
                if len(left) < min_leaf or len(right) < min_leaf:
                    continue
                score = (len(left) * gini(y[left], class_count)
                         + len(right) * gini(y[right], class_count)) / len(rows)
                if best is None or score < best[0] - EPS:
                    best = (score, j, t)
        if best is None:
            return ("leaf", majority(labels))
        _, j, t = best
        return ("split", j, t,
                build(rows[X[rows, j] <= t], depth + 1),
                build(rows[X[rows, j] > t], depth + 1))

    tree = build(np.arange(len(y)), 0)

    def predict_one(node, x):
        while node[0] == "split":
            _, j, t, left, right = node
            node = left if x[j] <= t else right
        return node[1]

    return lambda Q: np.array([predict_one(tree, q) for q in Q])


def reference_knn(train, labels, query, k, class_count):
    out = []
    for q in query:
        d2 = ((train - q) ** 2).sum(axis=1)
        order = np.lexsort((np.arange(len(train)), d2))
        votes = np.bincount(labels[order[:k]], minlength=class_count)
        out.append(int(np.argmax(votes)))
    return np.array(out)


# --- decision tree ----------------------------------------------------------

class TestDecisionTree:
    def test_single_class_is_depth_zero_leaf(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([3, 3, 3])
        tree = DecisionTree().fit(X, y, class_count=5)
        assert len(tree.nodes.feature) == 1
        assert (tree.predict(X) == 3).all()

    def test_xor_truth_table(self):
        X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
        y = np.array([0, 1, 1, 0])
        tree = DecisionTree(max_depth=2).fit(X, y, class_count=2)
        assert (tree.predict(X) == y).all()

    def test_depth_zero_predicts_global_majority(self):
        X = np.arange(10, dtype=float).reshape(-1, 1)
        y = np.array([0] * 4 + [1] * 6)
        tree = DecisionTree(max_depth=0).fit(X, y, class_count=2)
        assert (tree.predict(X) == 1).all()

    def test_majority_tie_goes_to_lowest_class(self):
        X = np.zeros((4, 1))
        y = np.array([2, 2, 5, 5])
        tree = DecisionTree().fit(X, y, class_count=6)
        assert (tree.predict(X) == 2).all()

    def test_memorizes_distinct_rows(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(64, 3))
        y = rng.integers(0, 4, 64)
        tree = DecisionTree().fit(X, y, class_count=4)
        assert (tree.predict(X) == y).all()

    def test_matches_reference_cart(self):
        rng = np.random.default_rng(99)
        for trial in range(15):
            n = int(rng.integers(8, 40))
            p = int(rng.integers(1, 4))
            class_count = int(rng.integers(2, 4))
            # Small integer grids force plenty of score and threshold ties.
            X = rng.integers(0, 4, size=(n, p)).astype(float)
            y = rng.integers(0, class_count, n)
            depth = [None, 2, 3][trial % 3]
            min_leaf = [1, 2][trial % 2]
            tree = DecisionTree(max_depth=depth, min_leaf=min_leaf).fit(
                X, y, class_count)
            oracle = reference_tree(X, y, class_count, depth, min_leaf)
            queries = rng.uniform(-1, 5, size=(60, p))
            assert (tree.predict(queries) == oracle(queries)).all(), f"trial {trial}"
            assert (tree.predict(X) == oracle(X)).all()

    def test_feature_subset_fallback_still_splits(self):
        # One informative feature among several constants: a subset draw that
        # misses it must fall back to the full feature set.
        X = np.zeros((20, 4))
        X[:, 2] = np.arange(20)
        y = (np.arange(20) >= 10).astype(int)
        tree = DecisionTree(feature_subset_size=1, seed=5).fit(X, y, class_count=2)
        assert (tree.predict(X) == y).all()

    def test_determinism(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(200, 5))
        y = rng.integers(0, 3, 200)
        a = DecisionTree(max_depth=6, feature_subset_size=2, seed=42).fit(X, y, 3)
        b = DecisionTree(max_depth=6, feature_subset_size=2, seed=42).fit(X, y, 3)
        assert np.array_equal(a.nodes.feature, b.nodes.feature)
        assert np.array_equal(a.nodes.threshold, b.nodes.threshold)

    def test_untrained_predict_raises(self):
        with pytest.raises(UntrainedModel):
            DecisionTree().predict(np.zeros((1, 2)))


# --- random forest ----------------------------------------------------------

class TestRandomForest:
    def test_single_tree_no_bootstrap_memorizes(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(50, 4))
        y = rng.integers(0, 3, 50)
        forest = RandomForest(n_trees=1, bootstrap=False, seed=0).fit(X, y, 3)
        assert (forest.predict(X) == y).all()

    def test_same_seed_identical_predictions(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(120, 4))
        y = rng.integers(0, 3, 120)
        Q = rng.normal(size=(40, 4))
        a = RandomForest(n_trees=15, max_depth=4, seed=7).fit(X, y, 3).predict(Q)
        b = RandomForest(n_trees=15, max_depth=4, seed=7).fit(X, y, 3).predict(Q)
        assert np.array_equal(a, b)

    def test_thread_count_does_not_change_model(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(100, 3))
        y = rng.integers(0, 2, 100)
        Q = rng.normal(size=(30, 3))
        serial = RandomForest(n_trees=9, max_depth=5, seed=1).fit(X, y, 2, threads=1)
        pooled = RandomForest(n_trees=9, max_depth=5, seed=1).fit(X, y, 2, threads=4)
        assert np.array_equal(serial.predict(Q), pooled.predict(Q))

    def test_vote_equals_tree_tally(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(80, 3))
        y = rng.integers(0, 4, 80)
        Q = rng.normal(size=(25, 3))
        forest = RandomForest(n_trees=12, max_depth=4, seed=3).fit(X, y, 4)
        votes = forest.vote_counts(Q)
        tally = np.zeros_like(votes)
        for tree in forest.trees:
            preds = tree.predict(Q)
            for i, c in enumerate(preds):
                tally[i, c] += 1
        assert np.array_equal(votes, tally)
        assert np.array_equal(forest.predict(Q), np.argmax(tally, axis=1))

    def test_round_trip_serialization(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(60, 3))
        y = rng.integers(0, 3, 60)
        Q = rng.normal(size=(20, 3))
        forest = RandomForest(n_trees=5, max_depth=4, seed=9).fit(X, y, 3)
        clone = model_from_jsonable(model_to_jsonable(forest))
        assert np.array_equal(forest.predict(Q), clone.predict(Q))


# --- gradient boosting --------------------------------------------------------

class TestGradientBoosting:
    def test_zero_learning_rate_predicts_prior_argmax(self):
        X = np.arange(12, dtype=float).reshape(-1, 1)
        y = np.array([0] * 3 + [2] * 7 + [1] * 2)
        model = GradientBoosting(n_trees=5, learning_rate=0.0).fit(X, y, 3)
        assert (model.predict(X) == 2).all()

    def test_linearly_separable_reaches_perfect_training_accuracy(self):
        rng = np.random.default_rng(8)
        X = np.vstack([rng.normal(-2, 0.5, size=(40, 2)), rng.normal(2, 0.5, size=(40, 2))])
        y = np.array([0] * 40 + [1] * 40)
        model = GradientBoosting(n_trees=50, max_depth=2, learning_rate=0.3).fit(X, y, 2)
        assert (model.predict(X) == y).all()

    def test_train_log_loss_non_increasing(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(150, 4))
        y = rng.integers(0, 3, 150)
        model = GradientBoosting(n_trees=25, max_depth=3, learning_rate=0.1).fit(X, y, 3)
        losses = model.train_loss_
        assert len(losses) == 25
        assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))

    def test_multiclass_learns_hour_rule(self):
        hours = np.tile(np.arange(24, dtype=float), 20)
        X = hours.reshape(-1, 1)
        y = (hours // 6).astype(int)
        model = GradientBoosting(n_trees=20, max_depth=3, learning_rate=0.3).fit(X, y, 4)
        assert np.mean(model.predict(X) == y) == 1.0

    def test_round_trip_serialization(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(60, 3))
        y = rng.integers(0, 3, 60)
        Q = rng.normal(size=(20, 3))
        model = GradientBoosting(n_trees=6, max_depth=2, learning_rate=0.2).fit(X, y, 3)
        clone = model_from_jsonable(model_to_jsonable(model))
        assert np.array_equal(model.predict(Q), clone.predict(Q))
        assert np.allclose(model.decision_scores(Q), clone.decision_scores(Q))


# --- knn ---------------------------------------------------------------------

class TestKNearestNeighbors:
    def test_k1_exact_match(self):
        X = np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 0.0]])
        y = np.array([0, 1, 2])
        model = KNearestNeighbors(n_neighbors=1).fit(X, y, 3)
        assert model.predict(np.array([[5.0, 5.0]]))[0] == 1

    def test_majority_vote(self):
        X = np.array([[0.0], [1.0], [10.0]])
        y = np.array([2, 2, 5])
        model = KNearestNeighbors(n_neighbors=3).fit(X, y, 6)
        assert model.predict(np.array([[0.5]]))[0] == 2

    def test_vote_tie_goes_to_lowest_class(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([3, 1])
        model = KNearestNeighbors(n_neighbors=2).fit(X, y, 4)
        assert model.predict(np.array([[0.5]]))[0] == 1

    def test_distance_tie_goes_to_lower_row_index(self):
        X = np.array([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0], [4.0, 2.0]])
        y = np.array([7, 3, 3, 0])
        model = KNearestNeighbors(n_neighbors=1).fit(X, y, 8)
        assert model.predict(np.array([[0.0, 1.0]]))[0] == 7

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            KNearestNeighbors(n_neighbors=5).fit(np.zeros((3, 1)), np.zeros(3, dtype=int), 2)

    def test_constant_feature_dropped(self):
        X = np.array([[1.0, 0.0], [1.0, 2.0], [1.0, 9.0]])
        y = np.array([0, 0, 1])
        model = KNearestNeighbors(n_neighbors=1).fit(X, y, 2)
        assert model.predict(np.array([[55.0, 8.5]]))[0] == 1

    def test_matches_lexsort_oracle_with_duplicates(self):
        rng = np.random.default_rng(11)
        for _ in range(8):
            n = int(rng.integers(10, 120))
            base = rng.integers(0, 3, size=(n, 2)).astype(float)  # many duplicates
            y = rng.integers(0, 4, n)
            k = int(rng.integers(1, min(7, n) + 1))
            model = KNearestNeighbors(n_neighbors=k).fit(base, y, 4)
            queries = rng.integers(0, 3, size=(30, 2)).astype(float)
            mean = base.mean(axis=0)
            std = base.std(axis=0)
            keep = std > 0
            scale = np.where(keep, std, 1.0)
            expected = reference_knn(((base - mean) / scale)[:, keep], y,
                                     ((queries - mean) / scale)[:, keep], k, 4)
            assert np.array_equal(model.predict(queries), expected)

    def test_round_trip_serialization(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(40, 3))
        y = rng.integers(0, 3, 40)
        Q = rng.normal(size=(15, 3))
        model = KNearestNeighbors(n_neighbors=3).fit(X, y, 3)
        clone = model_from_jsonable(model_to_jsonable(model))
        assert np.array_equal(model.predict(Q), clone.predict(Q))


# --- grid search ---------------------------------------------------------------

def clustered_dataset(seed=0, n_per=30):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(c * 8, 0.4, size=(n_per, 2)) for c in range(3)])
    y = np.repeat(np.arange(3), n_per)
    return Dataset(X, y, ["f0", "f1"], 3)


class TestGridSearch:
    def test_single_point_grid(self):
        data = clustered_dataset()
        result = grid_search("random_forest", {"n_trees": [5], "max_depth": [3]},
                             data, folds=3, seed=0)
        assert result.best.params == {"n_trees": 5, "max_depth": 3}

    def test_knn_small_k_wins_on_clean_clusters(self):
        data = clustered_dataset(seed=5)
        # Largest k that still fits in every fold-train split of 60 rows.
        result = grid_search("knn", {"n_neighbors": [1, 55]},
                             data, folds=3, seed=1)
        assert result.best.params["n_neighbors"] == 1

    def test_cv_table_shape(self):
        data = clustered_dataset(seed=2)
        grid = {"n_trees": [3, 6], "max_depth": [2, 4]}
        result = grid_search("random_forest", grid, data, folds=4, seed=3)
        assert len(result.cv_table) == 4 * 4

    def test_rare_class_downgrades_with_warning(self):
        X = np.arange(20, dtype=float).reshape(-1, 1)
        y = np.array([0] * 18 + [1] * 2)
        with pytest.warns(UserWarning, match="non-stratified"):
            kfold_indices(y, folds=5, seed=0)

    def test_stratified_folds_partition(self):
        y = np.repeat(np.arange(4), 12)
        folds = kfold_indices(y, 4, seed=9)
        seen = np.concatenate([test for _, test in folds])
        assert sorted(seen) == list(range(48))
        for train, test in folds:
            assert set(train) | set(test) == set(range(48))
            assert not set(train) & set(test)
            counts = np.bincount(y[test], minlength=4)
            assert (counts == 3).all()

    def test_tiebreak_prefers_fewer_trees(self):
        spec_small = ModelSpec("random_forest", {"n_trees": 5, "max_depth": 2})
        spec_big = ModelSpec("random_forest", {"n_trees": 50, "max_depth": 2})
        assert spec_small.tiebreak_key() < spec_big.tiebreak_key()
