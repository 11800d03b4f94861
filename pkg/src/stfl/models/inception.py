"""Inflated Inception-V1 (I3D) built from a 2D layout table."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stfl.errors import ConfigurationError, DimensionError
from stfl.models.arch import ArchSpec
from stfl.models.layers import Branches, Conv3d, Flatten, Layer, Pool3d, Sequential, conv_bn_relu, kaiming_normal
from stfl.ops import Conv3DSpec

MAX_TEMPORAL_EXTENT = 7


@dataclass(frozen=True)
class MixedWidths:
    """Output widths of the four branches of one inception block."""

    b0: int  # 1x1
    b1_reduce: int
    b1: int  # 3x3
    b2_reduce: int
    b2: int  # 3x3 (the original 5x5 slot)
    b3: int  # pool projection

    @property
    def out_channels(self) -> int:
        return self.b0 + self.b1 + self.b2 + self.b3


# 2D Inception-V1 layout. Pool rows are (name, "pool", window, stride, padding)
# in (T, H, W); conv rows are (name, "conv", out, d, stride).
LAYOUT_2D: tuple[tuple, ...] = (
    ("conv1a", "conv", 64, 7, 2),
    ("pool2a", "pool", (1, 3, 3), (1, 2, 2), (0, 1, 1)),
    ("conv2b", "conv", 64, 1, 1),
    ("conv2c", "conv", 192, 3, 1),
    ("pool3a", "pool", (1, 3, 3), (1, 2, 2), (0, 1, 1)),
    ("mixed3b", "mixed", MixedWidths(64, 96, 128, 16, 32, 32)),
    ("mixed3c", "mixed", MixedWidths(128, 128, 192, 32, 96, 64)),
    ("pool4a", "pool", (3, 3, 3), (2, 2, 2), (1, 1, 1)),
    ("mixed4b", "mixed", MixedWidths(192, 96, 208, 16, 48, 64)),
    ("mixed4c", "mixed", MixedWidths(160, 112, 224, 24, 64, 64)),
    ("mixed4d", "mixed", MixedWidths(128, 128, 256, 24, 64, 64)),
    ("mixed4e", "mixed", MixedWidths(112, 144, 288, 32, 64, 64)),
    ("mixed4f", "mixed", MixedWidths(256, 160, 320, 32, 128, 128)),
    ("pool5a", "pool", (2, 2, 2), (2, 2, 2), (0, 0, 0)),
    ("mixed5b", "mixed", MixedWidths(256, 160, 320, 32, 128, 128)),
    ("mixed5c", "mixed", MixedWidths(384, 192, 384, 48, 128, 128)),
)


def inflate_2d_to_3d(filter2d: np.ndarray, t: int) -> np.ndarray:
    """Repeat a (C', C, d, d) filter over ``t`` time steps, each slice divided by ``t``.

    A temporally constant clip then produces the 2D response on interior steps.
    """
    if t < 1:
        raise ConfigurationError(f"temporal extent must be >= 1, got {t}")
    if filter2d.ndim != 4:
        raise DimensionError(f"expected a (C', C, d, d) filter, got rank {filter2d.ndim}")
    slice_ = np.asarray(filter2d, dtype=np.float64) / t
    return np.repeat(slice_[:, :, None], t, axis=2).astype(filter2d.dtype)


def temporal_extent(d: int) -> int:
    return min(d, MAX_TEMPORAL_EXTENT)


class _Builder:
    def __init__(self, rng: np.random.Generator, dtype: np.dtype) -> None:
        self.rng = rng
        self.dtype = dtype

    def unit(self, in_channels: int, out_channels: int, d: int, stride: int = 1) -> Sequential:
        """Inflated conv (from a Kaiming-initialized 2D filter) -> BN -> ReLU."""
        w2d = kaiming_normal(self.rng, (out_channels, in_channels, d, d), out_channels * d * d, np.dtype(np.float64))
        t = temporal_extent(d)
        spec = Conv3DSpec.same(in_channels, out_channels, (t, d, d), (stride, stride, stride))
        return conv_bn_relu(spec, self.rng, self.dtype, weight=inflate_2d_to_3d(w2d, t).astype(self.dtype))

    def mixed(self, in_channels: int, w: MixedWidths) -> Branches:
        return Branches(
            ("branch0", self.unit(in_channels, w.b0, 1)),
            ("branch1", Sequential(
                ("reduce", self.unit(in_channels, w.b1_reduce, 1)),
                ("conv", self.unit(w.b1_reduce, w.b1, 3)),
            )),
            ("branch2", Sequential(
                ("reduce", self.unit(in_channels, w.b2_reduce, 1)),
                ("conv", self.unit(w.b2_reduce, w.b2, 3)),
            )),
            ("branch3", Sequential(
                ("pool", Pool3d("max", (3, 3, 3), (1, 1, 1), (1, 1, 1))),
                ("proj", self.unit(in_channels, w.b3, 1)),
            )),
        )


def _scaled(arch: ArchSpec, w: MixedWidths) -> MixedWidths:
    return MixedWidths(*(arch.width(v) for v in (w.b0, w.b1_reduce, w.b1, w.b2_reduce, w.b2, w.b3)))


def build_i3d(arch: ArchSpec, rng: np.random.Generator, dtype: np.dtype) -> Sequential:
    """Single-stream I3D; the final 1x1x1 logits conv has a bias and no BN/ReLU."""
    builder = _Builder(rng, dtype)
    layers: list[tuple[str, Layer]] = []
    channels = 3
    for row in LAYOUT_2D:
        name, kind = row[0], row[1]
        if kind == "conv":
            out = arch.width(row[2])
            layers.append((name, builder.unit(channels, out, row[3], row[4])))
            channels = out
        elif kind == "pool":
            layers.append((name, Pool3d("max", row[2], row[3], row[4])))
        else:
            widths = _scaled(arch, row[2])
            layers.append((name, builder.mixed(channels, widths)))
            channels = widths.out_channels
    layers += [
        ("pool", Pool3d("global_avg")),
        ("logits", Conv3d(Conv3DSpec(channels, arch.num_classes, (1, 1, 1), has_bias=True), rng, dtype=dtype)),
        ("flatten", Flatten()),
    ]
    return Sequential(*layers)
