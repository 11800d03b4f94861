"""Azimuthally averaged amplitude spectra of single frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stfl.constants import LUMA_WEIGHTS, SPECTRUM_BINS
from stfl.errors import DataError, DimensionError

SPECTRUM_MODES = ("log", "raw")
MIN_SPECTRUM_SIDE = 4
MIN_FEATURE_SIDE = 8


@dataclass(frozen=True)
class SpectrumFeature:
    values: np.ndarray  # (SPECTRUM_BINS,), values[0] == 1
    source: str = ""


def luminance(frame: np.ndarray, channel_axis: int = -1) -> np.ndarray:
    """Grayscale from RGB with (0.299, 0.587, 0.114) weights."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[channel_axis] != 3:
        raise DimensionError(f"expected 3 colour channels, got {frame.shape[channel_axis]}", axis="C")
    return np.tensordot(np.moveaxis(frame, channel_axis, -1), np.asarray(LUMA_WEIGHTS), axes=(-1, 0))


def amplitude_spectrum(frame: np.ndarray, mode: str = "log") -> np.ndarray:
    """Centered 2D DFT amplitude of a grayscale frame; ``log1p`` applied in log mode."""
    if mode not in SPECTRUM_MODES:
        raise ValueError(f"unknown spectrum mode '{mode}'")
    x = np.asarray(frame, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"expected a grayscale (H, W) frame, got rank {x.ndim}")
    if min(x.shape) < MIN_SPECTRUM_SIDE:
        raise DimensionError(f"frame {x.shape} is smaller than {MIN_SPECTRUM_SIDE}x{MIN_SPECTRUM_SIDE}")
    if not np.all(np.isfinite(x)):
        raise DataError("frame contains non-finite values")
    amplitude = np.abs(np.fft.fftshift(np.fft.fft2(x)))
    return np.log1p(amplitude) if mode == "log" else amplitude


def radius_map(shape: tuple[int, int]) -> np.ndarray:
    """Rounded distance of every pixel from the spectrum center (H // 2, W // 2)."""
    h, w = shape
    yy, xx = np.indices((h, w))
    return np.rint(np.hypot(yy - h // 2, xx - w // 2)).astype(np.int64)


def azimuthal_average(spectrum: np.ndarray) -> np.ndarray:
    """Mean over rings of equal rounded radius, for r = 0 .. min(H, W) // 2 - 1."""
    if spectrum.ndim != 2:
        raise DimensionError(f"expected an (H, W) spectrum, got rank {spectrum.ndim}")
    r_max = min(spectrum.shape) // 2 - 1
    radii = radius_map(spectrum.shape).ravel()
    keep = radii <= r_max
    sums = np.bincount(radii[keep], weights=spectrum.ravel()[keep], minlength=r_max + 1)
    counts = np.bincount(radii[keep], minlength=r_max + 1)
    return sums / counts


def resample_profile(profile: np.ndarray, bins: int = SPECTRUM_BINS) -> np.ndarray:
    """Linear interpolation onto ``bins`` evenly spaced radii, endpoints kept."""
    radii = np.arange(profile.size, dtype=np.float64)
    return np.interp(np.linspace(0.0, radii[-1], bins), radii, profile)


def spectrum_feature(frame: np.ndarray, *, mode: str = "log", source: str = "") -> SpectrumFeature:
    """300-bin radial profile of a frame, normalized by its DC bin.

    ``frame`` is grayscale (H, W) or RGB (H, W, 3).
    """
    x = np.asarray(frame, dtype=np.float64)
    if x.ndim == 3:
        x = luminance(x)
    if x.ndim != 2 or min(x.shape) < MIN_FEATURE_SIDE:
        raise DimensionError(f"frame {x.shape} is smaller than {MIN_FEATURE_SIDE}x{MIN_FEATURE_SIDE}")
    profile = resample_profile(azimuthal_average(amplitude_spectrum(x, mode)))
    if profile[0] == 0:
        raise DataError(f"degenerate frame{' ' + source if source else ''}: zero DC component")
    return SpectrumFeature(profile / profile[0], source)


def clip_frame_features(clip: np.ndarray, *, mode: str = "log", source: str = "") -> np.ndarray:
    """Feature matrix (T, 300) for every frame of a (3, T, H, W) clip."""
    if clip.ndim != 4 or clip.shape[0] != 3:
        raise DimensionError(f"expected a (3, T, H, W) clip, got {clip.shape}")
    gray = luminance(clip, channel_axis=0)
    return np.stack([
        spectrum_feature(gray[t], mode=mode, source=f"{source}#{t}").values
        for t in range(gray.shape[0])
    ])
