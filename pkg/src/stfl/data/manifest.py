"""Dataset index: CSV manifest of clip files with labels and splits."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from stfl.constants import LABEL_NAMES, NUM_CLASSES, SPLITS
from stfl.errors import DataError

logger = logging.getLogger(__name__)

MANIFEST_HEADER = ("path", "label", "split", "frames", "fps")

_LABEL_TOKENS = {"real": 0, "fake": 1, "0": 0, "1": 1}


@dataclass(frozen=True)
class ClipRecord:
    path: str
    label: int  # 0 real, 1 fake
    split: str
    frame_count: int
    fps: float = 30.0

    @property
    def label_name(self) -> str:
        return LABEL_NAMES[self.label]


@dataclass
class Manifest:
    """Validated list of records; relative paths resolve against ``base_dir``."""

    records: list[ClipRecord] = field(default_factory=list)
    base_dir: Path = field(default_factory=Path)

    def resolve(self, record: ClipRecord) -> Path:
        path = Path(record.path)
        return path if path.is_absolute() else self.base_dir / path

    def split(self, name: str) -> list[ClipRecord]:
        return [r for r in self.records if r.split == name]

    def counts(self, split: str | None = None) -> tuple[int, int]:
        """(n_real, n_fake), over one split or the whole manifest."""
        records = self.records if split is None else self.split(split)
        fake = sum(r.label for r in records)
        return len(records) - fake, fake

    def split_counts(self) -> dict[str, tuple[int, int]]:
        return {name: self.counts(name) for name in SPLITS}

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for r in self.records:
            writer.writerow([r.path, r.label_name, r.split, r.frame_count, f"{r.fps:g}"])
        return out.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def _parse_row(row: dict[str, str], line: int) -> ClipRecord:
    path = (row.get("path") or "").strip()
    if not path:
        raise DataError("empty path", line=line)
    label_token = (row.get("label") or "").strip().lower()
    if label_token not in _LABEL_TOKENS:
        raise DataError(f"bad label '{row.get('label')}', expected real or fake", line=line)
    split = (row.get("split") or "").strip().lower()
    if split not in SPLITS:
        raise DataError(f"bad split '{row.get('split')}', expected {' or '.join(SPLITS)}", line=line)
    try:
        frames = int(row.get("frames") or "")
        fps = float(row.get("fps") or 30.0)
    except ValueError:
        raise DataError("frames must be an integer and fps a number", line=line) from None
    if frames < 1:
        raise DataError(f"frames must be >= 1, got {frames}", line=line)
    if not fps > 0 or fps == float("inf"):
        raise DataError(f"fps must be a positive number, got {fps:g}", line=line)
    return ClipRecord(path, _LABEL_TOKENS[label_token], split, frames, fps)


def parse_manifest(text: str, base_dir: Path | None = None) -> Manifest:
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        raise DataError("empty manifest")
    reader = csv.DictReader(io.StringIO(text))
    header = tuple(name.strip() for name in (reader.fieldnames or ()))
    missing = [name for name in MANIFEST_HEADER if name not in header]
    if missing:
        raise DataError(f"header is missing column(s): {', '.join(missing)}", line=1)

    records: list[ClipRecord] = []
    seen: dict[str, int] = {}
    rows = iter(reader)
    while True:
        try:
            row = next(rows)
        except StopIteration:
            break
        except csv.Error as e:
            raise DataError(f"malformed CSV: {e}", line=reader.line_num) from None
        line = reader.line_num
        if not any((v or "").strip() for v in row.values() if isinstance(v, str)):
            continue
        record = _parse_row({k.strip(): v for k, v in row.items() if k is not None}, line)
        if record.path in seen:
            raise DataError(f"duplicate path '{record.path}' (first on line {seen[record.path]})", line=line)
        seen[record.path] = line
        records.append(record)
    if not records:
        raise DataError("manifest has a header but no records")
    return Manifest(records, base_dir or Path())


def load_manifest(path: str | Path) -> Manifest:
    """Read and validate a manifest CSV; relative clip paths resolve next to it."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise DataError(f"manifest {path} is not UTF-8 text (byte {e.start})") from None
    manifest = parse_manifest(text, path.parent)
    logger.info("Manifest %s: %s", path, manifest.split_counts())
    return manifest


def class_weights(manifest: Manifest, split: str = "train") -> np.ndarray:
    """w_c = N / (2 N_c), so weighted class totals are equal."""
    counts = np.array(manifest.counts(split), dtype=np.float64)
    for label, n in enumerate(counts):
        if n == 0:
            raise DataError(f"split '{split}' has no {LABEL_NAMES[label]} clips")
    return counts.sum() / (NUM_CLASSES * counts)
