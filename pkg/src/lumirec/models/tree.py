"""CART trees grown breadth-first over binned features.

Features are binned once per fit (midpoints between sorted distinct values;
quantile bins only past ``MAX_BINS`` distinct values), then whole tree levels
are split at once with per-(node, bin, class) histograms built by bincount.
That keeps the per-node Python overhead off the hot path, which matters for
forests and boosting rounds over tens of thousands of rows.

Split selection is deterministic: candidate features are scanned in index
order and candidate cuts in bin order, so equal scores resolve to the lowest
feature then the lowest threshold. A node whose random feature subset admits
no valid cut falls back to the full feature set before becoming a leaf.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_BINS = 1024
_LEAF = -1
_EPS = 1e-12


@dataclass
class BinnedMatrix:
    """Per-feature integer codes plus the real-valued cut for each bin edge."""

    codes: np.ndarray            # (n, p) int32; code <= b  <=>  value <= cuts[j][b]
    cuts: list[np.ndarray]       # per feature, ascending thresholds (len = bins - 1)
    n_bins: np.ndarray           # per feature

    @property
    def n_features(self) -> int:
        return self.codes.shape[1]


def bin_features(X: np.ndarray, max_bins: int = MAX_BINS) -> BinnedMatrix:
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    codes = np.empty((n, p), dtype=np.int32)
    cuts = []
    n_bins = np.empty(p, dtype=np.int64)
    for j in range(p):
        col = X[:, j]
        uniq = np.unique(col)
        if uniq.size > max_bins:
            qs = np.quantile(col, np.linspace(0, 1, max_bins + 1)[1:-1])
            edges = np.unique(qs)
        else:
            edges = (uniq[:-1] + uniq[1:]) / 2.0
        codes[:, j] = np.searchsorted(edges, col, side="left")
        cuts.append(edges)
        n_bins[j] = edges.size + 1
    return BinnedMatrix(codes=codes, cuts=cuts, n_bins=n_bins)


@dataclass
class TreeNodes:
    """Flat tree storage; ``left == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_value: np.ndarray  # class id (classification) or Newton step (regression)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        """Route every row to its leaf and return the leaf values."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            internal = self.left[node] != _LEAF
            if not internal.any():
                break
            rows = np.flatnonzero(internal)
            at = node[rows]
            go_left = X[rows, self.feature[at]] <= self.threshold[at]
            node[rows] = np.where(go_left, self.left[at], self.right[at])
        return self.leaf_value[node]

    def to_jsonable(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf_value": self.leaf_value.tolist(),
        }

    @classmethod
    def from_jsonable(cls, obj: dict, value_dtype=np.float64) -> "TreeNodes":
        return cls(
            feature=np.asarray(obj["feature"], dtype=np.int64),
            threshold=np.asarray(obj["threshold"], dtype=np.float64),
            left=np.asarray(obj["left"], dtype=np.int64),
            right=np.asarray(obj["right"], dtype=np.int64),
            leaf_value=np.asarray(obj["leaf_value"], dtype=value_dtype),
        )


class _NodeStore:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.leaf_value: list = []

    def add(self) -> int:
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.leaf_value.append(0)
        return len(self.feature) - 1

    def freeze(self, value_dtype) -> TreeNodes:
        return TreeNodes(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            leaf_value=np.asarray(self.leaf_value, dtype=value_dtype),
        )


def _feature_subsets(rng: np.random.Generator, n_slots: int, p: int, k: int) -> np.ndarray:
    """Boolean (n_slots, p) mask with exactly k allowed features per slot."""
    if k >= p:
        return np.ones((n_slots, p), dtype=bool)
    order = np.argsort(rng.random((n_slots, p)), axis=1)
    mask = np.zeros((n_slots, p), dtype=bool)
    np.put_along_axis(mask, order[:, :k], True, axis=1)
    return mask


def _grow(
    binned: BinnedMatrix,
    stats_builder,
    n_rows: int,
    max_depth: int | None,
    min_leaf: int,
    feature_subset_size: int | None,
    rng: np.random.Generator,
    importance: np.ndarray,
):
    """Shared breadth-first growth loop.

    ``stats_builder`` supplies the criterion: per-level slot totals, per-bin
    cumulative stats, split scores (lower is better), impurities, and leaf
    values. See _GiniStats and _SquaredErrorStats.
    """
    p = binned.n_features
    subset_size = feature_subset_size if feature_subset_size is not None else p
    store = _NodeStore()
    root = store.add()
    slot_nodes = [root]
    # Rows in finalized leaves park in a sentinel slot past the active ones.
    slot_of_row = np.zeros(n_rows, dtype=np.int64)
    depth = 0
    while slot_nodes:
        n_slots = len(slot_nodes)
        totals = stats_builder.slot_totals(slot_of_row, n_slots)
        slot_sizes = stats_builder.sizes(totals)

        must_leaf = stats_builder.is_pure(totals) | (slot_sizes < 2 * min_leaf)
        if max_depth is not None and depth >= max_depth:
            must_leaf[:] = True

        search = np.flatnonzero(~must_leaf)
        best_score = np.full(n_slots, np.inf)
        best_feature = np.full(n_slots, -1, dtype=np.int64)
        best_bin = np.zeros(n_slots, dtype=np.int64)
        sub_score = best_score.copy()
        sub_feature = best_feature.copy()
        sub_bin = best_bin.copy()
        if search.size:
            allowed = _feature_subsets(rng, n_slots, p, subset_size)
            for j in range(p):
                scores_j, bins_j, valid_j = stats_builder.best_cut(
                    slot_of_row, n_slots, j, totals, min_leaf)
                gain_all = valid_j & (scores_j < best_score - _EPS)
                best_score[gain_all] = scores_j[gain_all]
                best_feature[gain_all] = j
                best_bin[gain_all] = bins_j[gain_all]
                gain_sub = valid_j & allowed[:, j] & (scores_j < sub_score - _EPS)
                sub_score[gain_sub] = scores_j[gain_sub]
                sub_feature[gain_sub] = j
                sub_bin[gain_sub] = bins_j[gain_sub]
            # Prefer the subset winner; fall back to the all-features winner
            # only when the subset offered no valid cut at all.
            use_sub = sub_feature >= 0
            best_score = np.where(use_sub, sub_score, best_score)
            best_feature = np.where(use_sub, sub_feature, best_feature)
            best_bin = np.where(use_sub, sub_bin, best_bin)

        split_mask = best_feature >= 0
        split_mask &= ~must_leaf

        # Finalize leaves and record importances for split slots.
        leaf_slots = np.flatnonzero(~split_mask)
        leaf_values = stats_builder.leaf_values(totals)
        for s in leaf_slots:
            node = slot_nodes[s]
            store.leaf_value[node] = leaf_values[s]

        split_slots = np.flatnonzero(split_mask)
        if split_slots.size == 0:
            break

        gains = stats_builder.split_gain(totals, best_score)
        route_map = np.full(n_slots + 1, -1, dtype=np.int64)
        cut_feature = np.zeros(n_slots + 1, dtype=np.int64)
        cut_bin = np.full(n_slots + 1, -1, dtype=np.int64)
        next_nodes: list[int] = []
        for s in split_slots:
            node = slot_nodes[s]
            j = int(best_feature[s])
            b = int(best_bin[s])
            store.feature[node] = j
            store.threshold[node] = float(binned.cuts[j][b])
            left = store.add()
            right = store.add()
            store.left[node] = left
            store.right[node] = right
            importance[j] += gains[s]
            route_map[s] = len(next_nodes)
            cut_feature[s] = j
            cut_bin[s] = b
            next_nodes.extend((left, right))

        # Rows of leaf slots park in the sentinel; others route to children.
        sentinel = len(next_nodes)
        parked = route_map < 0
        codes_at = binned.codes[np.arange(n_rows), cut_feature[slot_of_row]]
        go_right = codes_at > cut_bin[slot_of_row]
        new_slot = route_map[slot_of_row] + go_right
        new_slot[parked[slot_of_row]] = sentinel
        slot_of_row = new_slot
        slot_nodes = next_nodes
        depth += 1
    return store


class _GiniStats:
    """Classification criterion: Gini impurity over class-count histograms."""

    def __init__(self, binned: BinnedMatrix, y: np.ndarray, class_count: int, n_total: int):
        self.binned = binned
        self.y = y.astype(np.int64)
        self.C = class_count
        self.n_total = n_total
        # code * C + y is constant per feature; levels only shift by slot.
        self._jy = [binned.codes[:, j].astype(np.int64) * class_count + self.y
                    for j in range(binned.n_features)]

    def slot_totals(self, slot_of_row, n_slots):
        counts = np.bincount(slot_of_row * self.C + self.y,
                             minlength=(n_slots + 1) * self.C)
        return counts[: n_slots * self.C].reshape(n_slots, self.C).astype(np.float64)

    @staticmethod
    def sizes(totals):
        return totals.sum(axis=1)

    @staticmethod
    def is_pure(totals):
        return totals.max(axis=1) == totals.sum(axis=1)

    def leaf_values(self, totals):
        return np.argmax(totals, axis=1)  # first max = lowest class id

    def _impurity(self, counts, sizes):
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = counts / sizes[..., None]
        gini = 1.0 - np.nansum(frac * frac, axis=-1)
        return np.where(sizes > 0, gini, 0.0)

    def best_cut(self, slot_of_row, n_slots, j, totals, min_leaf):
        bins = int(self.binned.n_bins[j])
        if bins < 2:
            inf = np.full(n_slots, np.inf)
            return inf, np.zeros(n_slots, dtype=np.int64), np.zeros(n_slots, dtype=bool)
        hist = np.bincount(slot_of_row * (bins * self.C) + self._jy[j],
                           minlength=(n_slots + 1) * bins * self.C)
        hist = hist[: n_slots * bins * self.C].reshape(n_slots, bins, self.C)
        left = hist.cumsum(axis=1)[:, :-1, :].astype(np.float64)  # cut after bin b
        nl = left.sum(axis=2)
        n = totals.sum(axis=1, keepdims=True)
        nr = n - nl
        # Weighted child Gini via sum-of-squares identities; the right-side
        # histogram never materializes: sum_c r_c^2 = T2 - 2 t.l + l2.
        l2 = np.einsum("svc,svc->sv", left, left)
        t2 = np.einsum("sc,sc->s", totals, totals)[:, None]
        r2 = t2 - 2.0 * np.einsum("sc,svc->sv", totals, left) + l2
        with np.errstate(invalid="ignore", divide="ignore"):
            score = (n - l2 / nl - r2 / nr) / n
        valid = (nl >= min_leaf) & (nr >= min_leaf)
        score = np.where(valid, score, np.inf)
        best = np.argmin(score, axis=1)  # first min = lowest threshold
        rows = np.arange(n_slots)
        return score[rows, best], best, valid[rows, best]

    def split_gain(self, totals, best_score):
        sizes = self.sizes(totals)
        parent = self._impurity(totals, sizes)
        weighted = np.where(np.isfinite(best_score), best_score, parent)
        return sizes * (parent - weighted) / self.n_total


class _SquaredErrorStats:
    """Regression criterion on boosting residuals with Newton leaf values.

    Split score is the (negated, size-weighted) variance-reduction term
    sum(g_child)^2 / n_child; leaf value is sum(g) / (sum(h) + eps).
    """

    def __init__(self, binned: BinnedMatrix, gradient: np.ndarray, hessian: np.ndarray,
                 n_total: int):
        self.binned = binned
        self.g = gradient.astype(np.float64)
        self.h = hessian.astype(np.float64)
        self.n_total = n_total

    def slot_totals(self, slot_of_row, n_slots):
        minlength = n_slots + 1
        count = np.bincount(slot_of_row, minlength=minlength)[:n_slots]
        gsum = np.bincount(slot_of_row, weights=self.g, minlength=minlength)[:n_slots]
        hsum = np.bincount(slot_of_row, weights=self.h, minlength=minlength)[:n_slots]
        return np.stack([count.astype(np.float64), gsum, hsum], axis=1)

    @staticmethod
    def sizes(totals):
        return totals[:, 0]

    @staticmethod
    def is_pure(totals):
        return np.zeros(totals.shape[0], dtype=bool)

    def leaf_values(self, totals):
        return totals[:, 1] / (totals[:, 2] + _EPS)

    def best_cut(self, slot_of_row, n_slots, j, totals, min_leaf):
        bins = int(self.binned.n_bins[j])
        if bins < 2:
            inf = np.full(n_slots, np.inf)
            return inf, np.zeros(n_slots, dtype=np.int64), np.zeros(n_slots, dtype=bool)
        code = slot_of_row * bins + self.binned.codes[:, j]
        minlength = (n_slots + 1) * bins
        count = np.bincount(code, minlength=minlength)[: n_slots * bins]
        gsum = np.bincount(code, weights=self.g, minlength=minlength)[: n_slots * bins]
        nl = count.reshape(n_slots, bins).cumsum(axis=1)[:, :-1].astype(np.float64)
        gl = gsum.reshape(n_slots, bins).cumsum(axis=1)[:, :-1]
        nr = totals[:, 0:1] - nl
        gr = totals[:, 1:2] - gl
        with np.errstate(invalid="ignore", divide="ignore"):
            score = -(gl * gl / nl + gr * gr / nr)
        valid = (nl >= min_leaf) & (nr >= min_leaf)
        score = np.where(valid, score, np.inf)
        best = np.argmin(score, axis=1)
        rows = np.arange(n_slots)
        return score[rows, best], best, valid[rows, best]

    def split_gain(self, totals, best_score):
        n = totals[:, 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            parent = -(totals[:, 1] ** 2) / n
        child = np.where(np.isfinite(best_score), best_score, parent)
        return (parent - child) / self.n_total  # SSE reduction share


@dataclass
class DecisionTree:
    """Gini CART classifier; leaves predict the majority class (tie: lowest id)."""

    max_depth: int | None = None
    min_leaf: int = 1
    feature_subset_size: int | None = None
    seed: int = 0
    nodes: TreeNodes | None = None
    importances_: np.ndarray | None = None
    class_count: int = 0

    def fit(self, X: np.ndarray | None, y: np.ndarray, class_count: int,
            binned: BinnedMatrix | None = None) -> "DecisionTree":
        y = np.asarray(y, dtype=np.int64)
        if binned is None:
            binned = bin_features(np.asarray(X, dtype=np.float64))
        self.class_count = class_count
        self.importances_ = np.zeros(binned.n_features)
        stats = _GiniStats(binned, y, class_count, n_total=len(y))
        rng = np.random.default_rng(self.seed)
        store = _grow(binned, stats, len(y), self.max_depth, self.min_leaf,
                      self.feature_subset_size, rng, self.importances_)
        self.nodes = store.freeze(np.int64)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.nodes is None:
            raise_untrained()
        return self.nodes.predict_value(X)


@dataclass
class RegressionTree:
    """Squared-error CART over boosting gradients with Newton leaf values."""

    max_depth: int | None = None
    min_leaf: int = 1
    nodes: TreeNodes | None = None

    def fit(self, binned: BinnedMatrix, gradient: np.ndarray, hessian: np.ndarray,
            rng: np.random.Generator, importance: np.ndarray) -> "RegressionTree":
        n = gradient.shape[0]
        stats = _SquaredErrorStats(binned, gradient, hessian, n_total=n)
        store = _grow(binned, stats, n, self.max_depth, self.min_leaf,
                      feature_subset_size=None, rng=rng, importance=importance)
        self.nodes = store.freeze(np.float64)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.nodes is None:
            raise_untrained()
        return self.nodes.predict_value(X)


def raise_untrained():
    from ..errors import UntrainedModel

    raise UntrainedModel("model has not been fitted")
