"""Per-bin spectrum statistics of real versus fake frames."""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stfl.errors import DataError, DimensionError
from stfl.spectral.features import spectrum_feature

STATS_HEADER = ("bin", "real_mean", "real_std", "fake_mean", "fake_std")


@dataclass(frozen=True)
class SpectrumStats:
    real_mean: np.ndarray
    real_std: np.ndarray
    fake_mean: np.ndarray
    fake_std: np.ndarray
    n_real: int
    n_fake: int

    @property
    def bins(self) -> int:
        return int(self.real_mean.size)

    def table(self) -> np.ndarray:
        """(bins, 4) array in header column order after ``bin``."""
        return np.column_stack([self.real_mean, self.real_std, self.fake_mean, self.fake_std])

    def within_one_std(self) -> float:
        """Fraction of bins whose class means differ by less than one pooled std."""
        pooled = np.sqrt((self.real_std ** 2 + self.fake_std ** 2) / 2)
        return float(np.mean(np.abs(self.real_mean - self.fake_mean) < pooled))

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(STATS_HEADER)
        for b, row in enumerate(self.table()):
            writer.writerow([b, *(f"{v:.10g}" for v in row)])
        return out.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def feature_stats(features: np.ndarray, labels: np.ndarray) -> SpectrumStats:
    """Mean and sample standard deviation (ddof 1) per bin and class."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise DimensionError(f"features {x.shape} and labels {y.shape} disagree")
    groups = {}
    for label, name in ((0, "real"), (1, "fake")):
        rows = x[y == label]
        if rows.shape[0] < 2:
            raise DataError(f"need at least 2 {name} samples for spectrum statistics, got {rows.shape[0]}")
        groups[name] = rows
    return SpectrumStats(
        real_mean=groups["real"].mean(axis=0),
        real_std=groups["real"].std(axis=0, ddof=1),
        fake_mean=groups["fake"].mean(axis=0),
        fake_std=groups["fake"].std(axis=0, ddof=1),
        n_real=groups["real"].shape[0],
        n_fake=groups["fake"].shape[0],
    )


def spectrum_stats(frames: Sequence[np.ndarray], labels: Sequence[int]) -> SpectrumStats:
    """Statistics of :func:`spectrum_feature` over grayscale or RGB frames."""
    if len(frames) != len(labels):
        raise DimensionError(f"{len(frames)} frames but {len(labels)} labels")
    features = np.stack([spectrum_feature(f).values for f in frames]) if frames else np.zeros((0, 0))
    return feature_stats(features, np.asarray(labels))
