"""ClipTensorFile: "CLPT" | version u16 | C, T, H, W u32 | <f4 payload in [0, 1]."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from stfl.constants import CLIP_MAGIC, CLIP_VERSION
from stfl.errors import DataError, DimensionError, FormatError

_HEADER = struct.Struct("<4sH4I")


def encode_clip(clip: np.ndarray) -> bytes:
    if clip.ndim != 4 or clip.shape[0] != 3:
        raise DimensionError(f"clip must be (3, T, H, W), got {clip.shape}")
    if min(clip.shape) < 1:
        raise DimensionError(f"clip extents must be positive, got {clip.shape}")
    payload = np.ascontiguousarray(clip, dtype="<f4")
    if not np.all(np.isfinite(payload)) or payload.min() < 0 or payload.max() > 1:
        raise DataError("clip values must lie in [0, 1]")
    return _HEADER.pack(CLIP_MAGIC, CLIP_VERSION, *clip.shape) + payload.tobytes()


def decode_clip(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FormatError("truncated clip header", offset=len(data))
    magic, version, *dims = _HEADER.unpack_from(data)
    if magic != CLIP_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CLIP_MAGIC!r}", offset=0)
    if version != CLIP_VERSION:
        raise FormatError(f"unsupported clip version {version}", offset=4)
    if dims[0] != 3 or min(dims) < 1:
        raise FormatError(f"bad clip dims {tuple(dims)}", offset=6)
    expected = 4 * int(np.prod(dims, dtype=np.int64))
    payload = len(data) - _HEADER.size
    if payload < expected:
        raise FormatError(f"truncated payload: {payload} of {expected} bytes", offset=len(data))
    if payload > expected:
        raise FormatError("trailing bytes after payload", offset=_HEADER.size + expected)
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(dims).astype(np.float32)


def write_clip(path: str | Path, clip: np.ndarray) -> None:
    Path(path).write_bytes(encode_clip(clip))


def read_clip(path: str | Path) -> np.ndarray:
    """Decode a clip file to a (3, T, H, W) float32 array."""
    return decode_clip(Path(path).read_bytes())
