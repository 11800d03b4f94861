"""Binary checkpoint container.

Layout (all integers little-endian)::

    "STFL" | version u16 | count u32 | count x entry
    optimizer flag u8 | [count u32 | count x entry]
    metadata length u32 | UTF-8 JSON

    entry = name length u16 | UTF-8 name | rank u8 | rank x extent u32 | <f4 payload

Batch-norm running statistics are ordinary entries. The JSON block carries
the architecture and whatever training metadata the caller supplies.
"""

from __future__ import annotations

import io
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from stfl.constants import CKPT_MAGIC, CKPT_VERSION
from stfl.errors import ConfigurationError, FormatError
from stfl.models.arch import ArchSpec
from stfl.models.network import Network, build

logger = logging.getLogger(__name__)

_SCHEMA_VERSION = 1

TensorMap = dict[str, np.ndarray]


@dataclass
class Checkpoint:
    network: Network
    optimizer_state: TensorMap | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def normalization(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Per-channel (mean, std) stored at training time, if any."""
        stored = self.metadata.get("normalization")
        if not stored:
            return None
        try:
            mean = np.asarray(stored["mean"], dtype=np.float64)
            std = np.asarray(stored["std"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"malformed normalization metadata: {e!r}") from e
        if mean.shape != (3,) or std.shape != (3,):
            raise FormatError(f"normalization metadata must hold 3 values per field, got {mean.shape} and {std.shape}")
        return mean, std


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------


def _write_tensors(out: io.BytesIO, tensors: TensorMap) -> None:
    out.write(struct.pack("<I", len(tensors)))
    for name, value in tensors.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise FormatError(f"tensor name too long: {name[:40]}...")
        arr = np.asarray(value)
        out.write(struct.pack("<H", len(encoded)))
        out.write(encoded)
        out.write(struct.pack("<B", arr.ndim))
        out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def checkpoint_save(
    network: Network,
    optimizer_state: TensorMap | None,
    path: str | Path,
    metadata: dict[str, Any] | None = None,
) -> None:
    """Write parameters, running statistics, optional optimizer state and metadata."""
    out = io.BytesIO()
    out.write(CKPT_MAGIC)
    out.write(struct.pack("<H", CKPT_VERSION))
    _write_tensors(out, network.state_dict())
    if optimizer_state is None:
        out.write(struct.pack("<B", 0))
    else:
        out.write(struct.pack("<B", 1))
        _write_tensors(out, optimizer_state)
    meta = {"schema_version": _SCHEMA_VERSION, **(metadata or {}), "arch": network.arch.to_dict()}
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    out.write(struct.pack("<I", len(blob)))
    out.write(blob)

    target = Path(path)
    tmp = target.with_suffix(target.suffix + ".tmp")
    tmp.write_bytes(out.getvalue())
    tmp.replace(target)
    logger.info("Wrote checkpoint %s (%d bytes)", target, out.tell())


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.offset = 0

    @property
    def at_end(self) -> bool:
        return self.offset >= len(self.data)

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise FormatError(f"truncated {what}", offset=self.offset)
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def _read_tensors(reader: _Reader) -> TensorMap:
    (count,) = reader.unpack("<I", "tensor count")
    tensors: TensorMap = {}
    for _ in range(count):
        start = reader.offset
        (name_len,) = reader.unpack("<H", "name length")
        try:
            name = reader.take(name_len, "tensor name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("tensor name is not UTF-8", offset=start + 2) from None
        if name in tensors:
            raise FormatError(f"duplicate tensor '{name}'", offset=start)
        (rank,) = reader.unpack("<B", "rank")
        shape = reader.unpack(f"<{rank}I", "extents")
        if any(extent < 1 for extent in shape):
            raise FormatError(f"tensor '{name}' has a zero extent", offset=start)
        count_bytes = 4 * int(np.prod(shape, dtype=np.int64))
        payload = reader.take(count_bytes, f"payload of '{name}'")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    return tensors


def read_checkpoint(path: str | Path) -> tuple[TensorMap, TensorMap | None, dict[str, Any]]:
    """Decode a checkpoint file into (parameters, optimizer state, metadata)."""
    reader = _Reader(Path(path).read_bytes())
    magic = reader.take(len(CKPT_MAGIC), "magic")
    if magic != CKPT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CKPT_MAGIC!r}", offset=0)
    (version,) = reader.unpack("<H", "version")
    if version != CKPT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=len(CKPT_MAGIC))
    params = _read_tensors(reader)

    optimizer: TensorMap | None = None
    metadata: dict[str, Any] = {}
    if reader.at_end:
        return params, optimizer, metadata
    flag_offset = reader.offset
    (flag,) = reader.unpack("<B", "optimizer flag")
    if flag not in (0, 1):
        raise FormatError(f"bad optimizer flag {flag}", offset=flag_offset)
    if flag:
        optimizer = _read_tensors(reader)
    if not reader.at_end:
        (length,) = reader.unpack("<I", "metadata length")
        meta_offset = reader.offset
        try:
            metadata = json.loads(reader.take(length, "metadata").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FormatError(f"malformed metadata: {e}", offset=meta_offset) from e
        if not isinstance(metadata, dict):
            raise FormatError("metadata is not a JSON object", offset=meta_offset)
    if not reader.at_end:
        raise FormatError("trailing bytes after metadata", offset=reader.offset)
    return params, optimizer, metadata


def checkpoint_load(path: str | Path, arch: ArchSpec | None = None) -> Checkpoint:
    """Rebuild the stored network (or ``arch`` when given) and load every tensor.

    Loading into a different architecture raises
    :class:`~stfl.errors.StateMismatchError` naming the first tensor that
    is missing or shaped differently.
    """
    params, optimizer, metadata = read_checkpoint(path)
    if arch is None:
        if "arch" not in metadata:
            raise FormatError("checkpoint carries no architecture; pass one explicitly")
        try:
            arch = ArchSpec.from_dict(metadata["arch"])
        except ConfigurationError as e:
            raise FormatError(f"checkpoint metadata: {e}") from e
    network = build(arch, seed=0)
    network.load_state_dict(params)
    logger.info("Loaded checkpoint %s (%s)", path, arch.family.value)
    return Checkpoint(network, optimizer, metadata)
