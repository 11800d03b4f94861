"""Synthetic real/fake clip dataset with temporal and spectral artifacts.

Real clips are smoothed noise textures drifting by whole pixels per frame.
Fake clips start from an independently drawn real clip and alter a
centered patch: per-frame independent flicker noise (temporal
incoherence) and 2x nearest-neighbour upsampling (spectral replicas).
Strength 0 leaves fakes statistically identical to reals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from stfl.data.clipfile import write_clip
from stfl.data.manifest import ClipRecord, Manifest
from stfl.errors import ConfigurationError

logger = logging.getLogger(__name__)

TEXTURE_CONTRAST = 0.15
FLICKER_SCALE = 0.2
SYNTH_FPS = 30.0


@dataclass(frozen=True)
class SynthConfig:
    n_real: int
    n_fake: int
    frames: int = 16
    hw: int = 32
    artifact_strength: float = 0.5
    seed: int = 0
    test_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.n_real < 1 or self.n_fake < 1:
            raise ConfigurationError("n_real and n_fake must be positive")
        if self.frames < 1 or self.hw < 4:
            raise ConfigurationError("frames must be >= 1 and hw >= 4")
        if not self.artifact_strength >= 0:
            raise ConfigurationError(f"artifact_strength must be >= 0, got {self.artifact_strength}")
        if not 0 <= self.test_fraction < 1:
            raise ConfigurationError(f"test_fraction must be in [0, 1), got {self.test_fraction}")


def coherent_clip(rng: np.random.Generator, frames: int, hw: int) -> np.ndarray:
    """(3, T, hw, hw) periodic texture translated by a fixed integer velocity."""
    noise = rng.standard_normal((3, hw, hw))
    texture = gaussian_filter(noise, sigma=(0, hw / 16, hw / 16), mode="wrap")
    texture = (texture - texture.mean()) / (texture.std() + 1e-12) * TEXTURE_CONTRAST
    texture += 0.5 + rng.uniform(-0.1, 0.1, size=(3, 1, 1))
    vy, vx = rng.integers(-1, 2, size=2)
    clip = np.stack([np.roll(texture, (t * vy, t * vx), axis=(1, 2)) for t in range(frames)], axis=1)
    return np.clip(clip, 0.0, 1.0)


def inject_artifacts(clip: np.ndarray, strength: float, rng: np.random.Generator) -> np.ndarray:
    """Flicker noise plus 2x nearest-neighbour upsampling inside the centered half-size patch."""
    _, t, h, w = clip.shape
    ph, pw = h // 2, w // 2
    top, left = (h - ph) // 2, (w - pw) // 2
    out = clip.copy()
    patch = out[:, :, top:top + ph, left:left + pw]
    blocky = np.repeat(np.repeat(patch[:, :, ::2, ::2], 2, axis=2), 2, axis=3)[:, :, :ph, :pw]
    blend = min(1.0, 2.0 * strength)
    patch = (1 - blend) * patch + blend * blocky
    patch = patch + strength * FLICKER_SCALE * rng.standard_normal((3, t, ph, pw))
    out[:, :, top:top + ph, left:left + pw] = patch
    return np.clip(out, 0.0, 1.0)


def _test_indices(n: int, fraction: float, rng: np.random.Generator) -> set[int]:
    return {int(i) for i in rng.permutation(n)[: int(round(n * fraction))]}


def synth_dataset(config: SynthConfig, out_dir: str | Path) -> Manifest:
    """Write clip files under ``out_dir/clips`` plus ``out_dir/manifest.csv``."""
    out_dir = Path(out_dir)
    (out_dir / "clips").mkdir(parents=True, exist_ok=True)
    split_rng = np.random.default_rng([config.seed, 2])
    records: list[ClipRecord] = []
    for label, name, count in ((0, "real", config.n_real), (1, "fake", config.n_fake)):
        test = _test_indices(count, config.test_fraction, split_rng)
        for index in range(count):
            rng = np.random.default_rng([config.seed, label, index])
            clip = coherent_clip(rng, config.frames, config.hw)
            if label == 1:
                clip = inject_artifacts(clip, config.artifact_strength, rng)
            rel = f"clips/{name}_{index:05d}.clpt"
            write_clip(out_dir / rel, clip.astype(np.float32))
            split = "test" if index in test else "train"
            records.append(ClipRecord(rel, label, split, config.frames, SYNTH_FPS))

    manifest = Manifest(records, out_dir)
    manifest.save(out_dir / "manifest.csv")
    logger.info(
        "Synthesized %d real + %d fake clips (%d frames, %dx%d, strength %.3g) in %s",
        config.n_real, config.n_fake, config.frames, config.hw, config.hw, config.artifact_strength, out_dir,
    )
    return manifest
