"""Frame-image directories (one still per frame) decoded with Pillow."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from stfl.errors import DataError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def list_frames(directory: str | Path) -> list[Path]:
    """Image files of ``directory`` in lexicographic (frame) order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"frame directory '{directory}' does not exist")
    frames = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not frames:
        raise DataError(f"no frame images in '{directory}'")
    return frames


def read_frames(directory: str | Path) -> np.ndarray:
    """Stack of RGB frames as a (T, 3, H, W) float32 array in [0, 1]."""
    stack = []
    size: tuple[int, int] | None = None
    for index, path in enumerate(list_frames(directory)):
        try:
            with Image.open(path) as img:
                rgb = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
        except (UnidentifiedImageError, OSError) as e:
            raise DataError(f"cannot decode '{path.name}': {e}", frame=index) from e
        if size is None:
            size = rgb.shape[:2]
        elif rgb.shape[:2] != size:
            raise DataError(f"frame size {rgb.shape[:2]} differs from first frame {size}", frame=index)
        stack.append(rgb.transpose(2, 0, 1))
    logger.info("Read %d frames of %s from %s", len(stack), size, directory)
    return np.stack(stack)
