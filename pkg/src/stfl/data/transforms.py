"""Frame geometry and clip sampling: bilinear resize, face crops, jittered clips."""

from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stfl.constants import FACE_CROP_SIZE, PRECROP_RATIO
from stfl.errors import DataError, DimensionError, NumericError

Box = tuple[int, int, int, int]  # x, y, w, h
BOX_HEADER = ("frame", "x", "y", "w", "h")
SAMPLE_MODES = ("train", "eval")


# ---------------------------------------------------------------------------
# Resizing and cropping
# ---------------------------------------------------------------------------


def _axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centers, edge samples clamped
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_bilinear(images: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize over the last two axes."""
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"output size must be positive, got {out_h}x{out_w}")
    x = np.asarray(images, dtype=np.float64)
    h, w = x.shape[-2:]
    if (h, w) == (out_h, out_w):
        return x.astype(images.dtype, copy=True)
    lo, hi, frac = _axis_weights(h, out_h)
    x = x[..., lo, :] * (1 - frac)[:, None] + x[..., hi, :] * frac[:, None]
    lo, hi, frac = _axis_weights(w, out_w)
    x = x[..., lo] * (1 - frac) + x[..., hi] * frac
    return x.astype(images.dtype)


def resize_short_side(images: np.ndarray, short: int) -> np.ndarray:
    h, w = images.shape[-2:]
    if h <= w:
        size = (short, max(1, int(round(w * short / h))))
    else:
        size = (max(1, int(round(h * short / w))), short)
    return resize_bilinear(images, *size)


def crop_faces(frames: np.ndarray, boxes: Sequence[Box], out_size: int = FACE_CROP_SIZE) -> np.ndarray:
    """Crop each (3, H, W) frame of a (T, 3, H, W) stack to its box, resized to out_size²."""
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise DimensionError(f"frames must be (T, 3, H, W), got {frames.shape}")
    if len(boxes) != frames.shape[0]:
        raise DataError(f"{len(boxes)} boxes for {frames.shape[0]} frames")
    _, _, height, width = frames.shape
    out = np.empty((frames.shape[0], 3, out_size, out_size), dtype=frames.dtype)
    for i, (x, y, w, h) in enumerate(boxes):
        if w < 1 or h < 1:
            raise DataError(f"box ({x}, {y}, {w}, {h}) has zero area", frame=i)
        if x < 0 or y < 0 or x + w > width or y + h > height:
            raise DataError(f"box ({x}, {y}, {w}, {h}) exceeds frame {width}x{height}", frame=i)
        out[i] = resize_bilinear(frames[i, :, y:y + h, x:x + w], out_size, out_size)
    return out


def load_boxes(path: str | Path) -> list[Box]:
    """Read a ``frame,x,y,w,h`` CSV with one row per frame in order."""
    boxes: list[Box] = []
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != BOX_HEADER:
            raise DataError(f"box file header must be {','.join(BOX_HEADER)}", line=1)
        for row in reader:
            try:
                frame, x, y, w, h = (int(row[k]) for k in BOX_HEADER)
            except (TypeError, ValueError):
                raise DataError("box values must be integers", line=reader.line_num) from None
            if frame != len(boxes):
                raise DataError(f"expected frame {len(boxes)}, got {frame}", line=reader.line_num)
            boxes.append((x, y, w, h))
    if not boxes:
        raise DataError("box file has no rows")
    return boxes


# ---------------------------------------------------------------------------
# Clip sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClipWindow:
    """Where a sampled clip came from: first frame and crop corner after pre-crop resize."""

    start: int
    top: int
    left: int


def precrop_size(target_hw: tuple[int, int]) -> int:
    """Short side before cropping: 112 -> 128, 224 -> 256."""
    return int(round(max(target_hw) * PRECROP_RATIO))


def sample_clip(
    video: np.ndarray,
    length: int,
    target_hw: tuple[int, int],
    mode: str = "eval",
    seed: int | np.random.Generator = 0,
    *,
    start: int | None = None,
) -> tuple[np.ndarray, ClipWindow]:
    """Take ``length`` consecutive frames of a (3, T, H, W) video and crop to ``target_hw``.

    Train mode draws the start frame and the crop window uniformly; eval
    mode centers both. ``start`` overrides the temporal choice.
    """
    if mode not in SAMPLE_MODES:
        raise ValueError(f"unknown sampling mode '{mode}'")
    if video.ndim != 4 or video.shape[0] != 3:
        raise DimensionError(f"video must be (3, T, H, W), got {video.shape}")
    frame_count = video.shape[1]
    if frame_count < length:
        raise DataError(f"clip has {frame_count} frames, need {length}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    train = mode == "train"

    if start is None:
        start = int(rng.integers(0, frame_count - length + 1)) if train else (frame_count - length) // 2
    elif not 0 <= start <= frame_count - length:
        raise DataError(f"start {start} outside [0, {frame_count - length}]")
    frames = resize_short_side(video[:, start:start + length], precrop_size(target_hw))

    th, tw = target_hw
    h, w = frames.shape[-2:]
    if h < th or w < tw:
        raise DimensionError(f"resized frames {h}x{w} smaller than crop {th}x{tw}")
    if train:
        top = int(rng.integers(0, h - th + 1))
        left = int(rng.integers(0, w - tw + 1))
    else:
        top, left = (h - th) // 2, (w - tw) // 2
    clip = np.ascontiguousarray(frames[:, :, top:top + th, left:left + tw])
    return clip, ClipWindow(start, top, left)


def eval_starts(frame_count: int, length: int, count: int = 1) -> list[int]:
    """Evenly spaced clip starts; a single clip is centered."""
    if frame_count < length:
        raise DataError(f"clip has {frame_count} frames, need {length}")
    last = frame_count - length
    if count <= 1:
        return [last // 2]
    starts = np.rint(np.linspace(0, last, count)).astype(int)
    return list(dict.fromkeys(int(s) for s in starts))


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def _per_channel(v: np.ndarray) -> np.ndarray:
    # channel axis is 4th from the end in both (3, T, H, W) and (N, 3, T, H, W)
    return np.asarray(v, dtype=np.float64).reshape((-1,) + (1,) * 3)


def normalize(clip: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """(x - mean) / std per channel."""
    std = np.asarray(std, dtype=np.float64)
    if np.any(std <= 0):
        raise NumericError("per-channel std must be positive", op="normalize")
    out = (clip - _per_channel(mean)) / _per_channel(std)
    return out.astype(clip.dtype)


def denormalize(clip: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    out = clip * _per_channel(std) + _per_channel(mean)
    return out.astype(clip.dtype)


def channel_stats(videos: Iterable[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and population std over every pixel of every (3, T, H, W) video."""
    total = np.zeros(3)
    total_sq = np.zeros(3)
    count = 0
    for video in videos:
        v = np.asarray(video, dtype=np.float64).reshape(3, -1)
        total += v.sum(axis=1)
        total_sq += (v ** 2).sum(axis=1)
        count += v.shape[1]
    if count == 0:
        raise DataError("no clips to compute normalization statistics from")
    mean = total / count
    std = np.sqrt(np.maximum(total_sq / count - mean ** 2, 0.0))
    return mean, std
