"""Classification metrics."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, Field

from peftt.exceptions import MetricsError


def _as_labels(preds: ArrayLike, golds: ArrayLike) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    p = np.asarray(preds, dtype=np.int64).reshape(-1)
    g = np.asarray(golds, dtype=np.int64).reshape(-1)
    if p.shape != g.shape:
        raise MetricsError(f"predictions ({p.size}) and gold labels ({g.size}) differ in length")
    if p.size == 0:
        raise MetricsError("metrics need at least one example")
    return p, g


class ConfusionMatrix(BaseModel):
    """Counts indexed [gold][predicted]."""

    counts: list[list[int]] = Field(description="counts[g][p] = examples with gold g predicted as p")

    @classmethod
    def from_predictions(cls, preds: ArrayLike, golds: ArrayLike, n_classes: int) -> ConfusionMatrix:
        p, g = _as_labels(preds, golds)
        if min(p.min(), g.min()) < 0 or max(p.max(), g.max()) >= n_classes:
            raise MetricsError(f"labels must lie in [0, {n_classes})")
        matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(matrix, (g, p), 1)
        return cls(counts=matrix.tolist())

    @property
    def matrix(self) -> NDArray[np.int64]:
        return np.asarray(self.counts, dtype=np.int64)

    @property
    def n_classes(self) -> int:
        return len(self.counts)

    def true_positives(self) -> NDArray[np.int64]:
        return np.diag(self.matrix)

    def false_positives(self) -> NDArray[np.int64]:
        return self.matrix.sum(axis=0) - self.true_positives()

    def false_negatives(self) -> NDArray[np.int64]:
        return self.matrix.sum(axis=1) - self.true_positives()

    def per_class_f1(self) -> NDArray[np.float64]:
        """F1 per class; a zero denominator yields 0."""
        tp = self.true_positives().astype(np.float64)
        fp = self.false_positives().astype(np.float64)
        fn = self.false_negatives().astype(np.float64)
        precision = np.divide(tp, tp + fp, out=np.zeros_like(tp), where=(tp + fp) > 0)
        recall = np.divide(tp, tp + fn, out=np.zeros_like(tp), where=(tp + fn) > 0)
        total = precision + recall
        return np.divide(2 * precision * recall, total, out=np.zeros_like(tp), where=total > 0)


def confusion(preds: ArrayLike, golds: ArrayLike, n_classes: int) -> ConfusionMatrix:
    return ConfusionMatrix.from_predictions(preds, golds, n_classes)


def accuracy(preds: ArrayLike, golds: ArrayLike) -> float:
    p, g = _as_labels(preds, golds)
    return float(np.mean(p == g))


def macro_f1(preds: ArrayLike, golds: ArrayLike, n_classes: int | None = None) -> float:
    """Unweighted mean of per-class F1 over every declared class.

    Classes absent from both predictions and gold labels contribute 0.
    Without `n_classes`, the classes are those seen in either sequence.
    """
    p, g = _as_labels(preds, golds)
    if n_classes is None:
        n_classes = int(max(p.max(), g.max())) + 1
    return float(confusion(p, g, n_classes).per_class_f1().mean())


def summarize(values: Sequence[float]) -> dict[str, float]:
    """Mean, standard deviation, minimum and maximum of repeated measurements."""
    if not values:
        raise MetricsError("nothing to summarize")
    data = np.asarray(values, dtype=np.float64)
    return {
        "mean": float(data.mean()),
        "std": float(data.std()),
        "min": float(data.min()),
        "max": float(data.max()),
    }
