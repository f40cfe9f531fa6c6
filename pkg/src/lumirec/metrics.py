"""Multi-class classification metrics from confusion-matrix counts.

Per-class scores are one-vs-rest readings of the matrix. Accuracy is
trace over total, and balanced accuracy is the mean of per-class recalls,
which reduces exactly to (recall + specificity) / 2 for two classes.
Undefined 0/0 ratios score 0 and are flagged so aggregates stay total
and auditable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyMatrix, LengthMismatch


@dataclass
class ConfusionMatrix:
    """C x C counts; rows are true classes, columns predicted."""

    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def class_count(self) -> int:
        return self.counts.shape[0]


@dataclass
class PerClassMetrics:
    precision: float
    recall: float
    specificity: float
    f1: float
    support: int
    undefined: tuple[str, ...] = ()


@dataclass
class MetricReport:
    per_class: list[PerClassMetrics]
    accuracy: float
    balanced_accuracy: float

    @property
    def supports(self) -> list[int]:
        return [pc.support for pc in self.per_class]


def confusion(y_true: Sequence[int], y_pred: Sequence[int], class_count: int) -> ConfusionMatrix:
    """Tally counts[i][j] = #(true == i and predicted == j).

    Empty inputs yield the zero matrix; unequal lengths raise LengthMismatch.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{y_true.size} true labels vs {y_pred.size} predictions")
    if y_true.size and (y_true.min() < 0 or y_true.max() >= class_count
                        or y_pred.min() < 0 or y_pred.max() >= class_count):
        raise ValueError(f"labels outside [0, {class_count})")
    counts = np.bincount(y_true * class_count + y_pred, minlength=class_count * class_count)
    return ConfusionMatrix(counts.reshape(class_count, class_count))


def _ratio(num: float, den: float, flag: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def metrics(cm: ConfusionMatrix) -> MetricReport:
    """Per-class precision/recall/specificity/F1 plus accuracy and balanced accuracy."""
    counts = cm.counts
    n = cm.n
    if n < 1:
        raise EmptyMatrix("confusion matrix has no observations")
    per_class: list[PerClassMetrics] = []
    recalls = []
    for i in range(cm.class_count):
        tp = float(counts[i, i])
        fn = float(counts[i, :].sum() - tp)
        fp = float(counts[:, i].sum() - tp)
        tn = float(n - tp - fn - fp)
        flags: list[str] = []
        precision = _ratio(tp, tp + fp, "precision", flags)
        recall = _ratio(tp, tp + fn, "recall", flags)
        specificity = _ratio(tn, tn + fp, "specificity", flags)
        f1 = _ratio(2 * precision * recall, precision + recall, "f1", flags)
        per_class.append(PerClassMetrics(
            precision=precision, recall=recall, specificity=specificity, f1=f1,
            support=int(tp + fn), undefined=tuple(flags),
        ))
        recalls.append(recall)
    return MetricReport(
        per_class=per_class,
        accuracy=float(np.trace(counts)) / n,
        balanced_accuracy=float(np.mean(recalls)),
    )


def weighted_cluster_aggregate(
    reports: Sequence[tuple[MetricReport, float]],
) -> MetricReport:
    """Population-weighted mean of every scalar metric across cluster reports."""
    if not reports:
        raise ValueError("nothing to aggregate")
    populations = np.array([pop for _, pop in reports], dtype=float)
    if (populations <= 0).any():
        raise ValueError("populations must be positive")
    weights = populations / populations.sum()

    def wmean(values) -> float:
        return float(np.dot(weights, values))

    class_count = len(reports[0][0].per_class)
    per_class = []
    for i in range(class_count):
        rows = [r.per_class[i] for r, _ in reports]
        per_class.append(PerClassMetrics(
            precision=wmean([pc.precision for pc in rows]),
            recall=wmean([pc.recall for pc in rows]),
            specificity=wmean([pc.specificity for pc in rows]),
            f1=wmean([pc.f1 for pc in rows]),
            support=int(sum(pc.support for pc in rows)),
            undefined=(),
        ))
    return MetricReport(
        per_class=per_class,
        accuracy=wmean([r.accuracy for r, _ in reports]),
        balanced_accuracy=wmean([r.balanced_accuracy for r, _ in reports]),
    )


def adjusted_rand_index(labels_a: Sequence[int], labels_b: Sequence[int]) -> float:
    """Chance-corrected agreement between two partitions of the same items."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.size} vs {b.size} labels")
    n = a.size
    if n < 2:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    expected = sum_rows * sum_cols / comb2(n)
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))
