"""Serialized evaluation reports and the per-epoch training history."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from stfl.constants import REPORT_DECIMALS
from stfl.errors import FormatError

HISTORY_HEADER = ("epoch", "lr", "train_loss", "test_auc", "test_acc")


def fmt_metric(value: float) -> str:
    """Metric with exactly four decimals; NaN stays 'nan'."""
    return "nan" if math.isnan(value) else f"{value:.{REPORT_DECIMALS}f}"


@dataclass
class EvalReport:
    method: str
    split: str
    aggregation: str
    roc_auc: float
    accuracy: float
    n: int
    n_real: int = 0
    n_fake: int = 0
    curve_file: str = ""
    best_epoch: bool = False

    def to_dict(self) -> dict[str, object]:
        return {
            "method": self.method,
            "split": self.split,
            "aggregation": self.aggregation,
            "roc_auc": fmt_metric(self.roc_auc),
            "accuracy": fmt_metric(self.accuracy),
            "n": self.n,
            "n_real": self.n_real,
            "n_fake": self.n_fake,
            "curve_file": self.curve_file,
            "best_epoch": str(self.best_epoch).lower(),
        }

    def to_text(self) -> str:
        return "".join(f"{key}: {value}\n" for key, value in self.to_dict().items())

    @classmethod
    def from_text(cls, text: str) -> EvalReport:
        data: dict[str, str] = {}
        for line in text.splitlines():
            key, sep, value = line.partition(":")
            if sep:
                data[key.strip()] = value.strip()
        try:
            return cls(
                method=data["method"],
                split=data["split"],
                aggregation=data["aggregation"],
                roc_auc=float(data["roc_auc"]),
                accuracy=float(data["accuracy"]),
                n=int(data["n"]),
                n_real=int(data.get("n_real", 0)),
                n_fake=int(data.get("n_fake", 0)),
                curve_file=data.get("curve_file", ""),
                best_epoch=data.get("best_epoch", "false") == "true",
            )
        except (KeyError, ValueError) as e:
            raise FormatError(f"malformed evaluation report: {e}") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


@dataclass(frozen=True)
class HistoryRow:
    epoch: int
    lr: float
    train_loss: float
    test_auc: float
    test_acc: float


@dataclass
class History:
    rows: list[HistoryRow] = field(default_factory=list)

    def append(self, row: HistoryRow) -> None:
        self.rows.append(row)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(HISTORY_HEADER)
        for r in self.rows:
            writer.writerow([
                r.epoch, f"{r.lr:.10g}", f"{r.train_loss:.6f}", fmt_metric(r.test_auc), fmt_metric(r.test_acc),
            ])
        return out.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> History:
        history = cls()
        with Path(path).open(newline="", encoding="utf-8") as f:
            for row in csv.DictReader(f):
                history.append(HistoryRow(
                    int(row["epoch"]), float(row["lr"]), float(row["train_loss"]),
                    float(row["test_auc"]), float(row["test_acc"]),
                ))
        return history
