"""Accuracy, per-class accuracy, confusion matrices, and cross-validation
aggregation. Matrix rows are true classes, columns predicted classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import FusionModel, Sample, predict


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # K x K int64
    class_names: list[str]

    @classmethod
    def empty(cls, class_names: list[str]) -> "ConfusionMatrix":
        k = len(class_names)
        return cls(np.zeros((k, k), dtype=np.int64), list(class_names))

    @property
    def K(self) -> int:
        return len(self.class_names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def add(self, true: int, pred: int) -> None:
        self.counts[true, pred] += 1

    def row_normalized(self) -> np.ndarray:
        """Percent-style row normalization; all-zero rows stay zero."""
        sums = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        safe = np.where(sums == 0, 1.0, sums)
        return np.where(sums == 0, 0.0, self.counts / safe)

    def to_csv(self) -> str:
        """Header of class names, then rows in class-index order."""
        lines = ["true\\pred," + ",".join(self.class_names)]
        for i, name in enumerate(self.class_names):
            lines.append(name + "," + ",".join(str(int(c)) for c in self.counts[i]))
        return "\n".join(lines) + "\n"

    def to_heatmap_data(self) -> str:
        """Plain-text row-normalized matrix, gnuplot `plot matrix` friendly."""
        rn = self.row_normalized()
        return "\n".join(" ".join(f"{v:.6f}" for v in row) for row in rn) + "\n"


@dataclass
class Metrics:
    accuracy: float
    per_class: np.ndarray  # NaN where a class has no test samples
    total: int

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix) -> "Metrics":
        total = cm.total
        acc = float(np.trace(cm.counts)) / total if total else float("nan")
        row_sums = cm.counts.sum(axis=1).astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            per_class = np.where(row_sums == 0, np.nan,
                                 np.diag(cm.counts) / np.where(row_sums == 0, 1, row_sums))
        return cls(acc, per_class, total)

    def macro_accuracy(self) -> float:
        """Mean per-class accuracy over classes present in the test set."""
        return float(np.nanmean(self.per_class))


def evaluate(model: FusionModel, samples: list[Sample],
             class_names: list[str]) -> tuple[Metrics, ConfusionMatrix]:
    """Eval-mode predictions over a test set."""
    if not samples:
        raise ValueError("empty test set")
    cm = ConfusionMatrix.empty(class_names)
    for s in samples:
        cm.add(s.label, predict(model, s))
    return Metrics.from_confusion(cm), cm


@dataclass
class CvSummary:
    fold_accuracies: list[float]
    pooled: ConfusionMatrix
    pooled_metrics: Metrics


def aggregate_cv(fold_results: list[tuple[Metrics, ConfusionMatrix]]) -> CvSummary:
    """Pool fold confusion matrices element-wise; pooled accuracy is total
    correct over total evaluated."""
    if not fold_results:
        raise ValueError("no folds to aggregate")
    names = fold_results[0][1].class_names
    for _, cm in fold_results:
        if cm.class_names != names:
            raise ValueError("inconsistent class tables across folds")
    pooled = ConfusionMatrix.empty(names)
    for _, cm in fold_results:
        pooled.counts += cm.counts
    return CvSummary(
        fold_accuracies=[m.accuracy for m, _ in fold_results],
        pooled=pooled,
        pooled_metrics=Metrics.from_confusion(pooled),
    )
