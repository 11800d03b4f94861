"""Accuracy, ROC curve and ROC-AUC for binary scores (label 1 = fake = positive)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stfl.constants import ACCURACY_THRESHOLD
from stfl.errors import DataError, DimensionError

ROC_HEADER = ("threshold", "fpr", "tpr")


@dataclass(frozen=True)
class RocCurve:
    """Operating points for every distinct threshold, starting at (0, 0) for +inf."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    fp: np.ndarray  # cumulative integer counts behind fpr / tpr
    tp: np.ndarray

    def area(self) -> float:
        """Trapezoidal area of the emitted (fpr, tpr) points."""
        return float(np.sum(np.diff(self.fpr) * (self.tpr[1:] + self.tpr[:-1]) / 2))

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(ROC_HEADER)
        for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
            writer.writerow([f"{t:.17g}", f"{f:.17g}", f"{p:.17g}"])
        return out.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def _check(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or s.shape != y.shape:
        raise DimensionError(f"scores {s.shape} and labels {y.shape} must be equal-length vectors")
    if not np.all(np.isin(y, (0, 1))):
        raise DataError("labels must be 0 (real) or 1 (fake)")
    if y.size == 0 or y.min() == y.max():
        raise DataError("ROC analysis needs both classes")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite")
    return s, y.astype(np.int64)


def roc_curve(scores: np.ndarray, labels: np.ndarray) -> RocCurve:
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tp = np.r_[0, np.cumsum(y)[ends]]
    fp = np.r_[0, np.cumsum(1 - y)[ends]]
    thresholds = np.r_[np.inf, s[ends]]
    return RocCurve(thresholds, fp / fp[-1], tp / tp[-1], fp, tp)


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Trapezoidal AUC over integer counts; equals P(s_fake > s_real) + P(tie) / 2."""
    curve = roc_curve(scores, labels)
    fp, tp = curve.fp, curve.tp
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    return twice_area / (2 * int(fp[-1]) * int(tp[-1]))


def accuracy(scores: np.ndarray, labels: np.ndarray, threshold: float = ACCURACY_THRESHOLD) -> float:
    """Fraction of samples with (score >= threshold) == label."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.size == 0:
        raise DimensionError("scores and labels must be non-empty and equal-length")
    return float(np.mean((s >= threshold).astype(np.int64) == y))
