"""Recurrent convolutional network: per-frame VGG-11-BN encoder, LSTM, FC head."""

from __future__ import annotations

import numpy as np

from stfl.models.arch import ArchSpec
from stfl.models.layers import (
    BatchNorm3d,
    Conv3d,
    FrameSequence,
    Layer,
    Linear,
    Lstm,
    Pool3d,
    ReLU,
    Sequential,
)
from stfl.ops import Conv3DSpec, LstmSpec

# "M" is a (1,2,2) max-pool; integers are conv widths.
VGG11_LAYOUT: tuple[int | str, ...] = (64, "M", 128, "M", 256, 256, "M", 512, 512, "M", 512, 512, "M")
LSTM_HIDDEN = 512
LSTM_LAYERS = 3
HEAD_HIDDEN = 256


def build_encoder(arch: ArchSpec, rng: np.random.Generator, dtype: np.dtype) -> tuple[Sequential, int]:
    """Temporally flat (1,3,3) convolutions, so every frame is encoded independently."""
    layers: list[tuple[str, Layer]] = []
    channels = 3
    conv_no = pool_no = 0
    for item in VGG11_LAYOUT:
        if item == "M":
            pool_no += 1
            layers.append((f"pool{pool_no}", Pool3d("max", (1, 2, 2), (1, 2, 2))))
            continue
        conv_no += 1
        out = arch.width(int(item))
        layers += [
            (f"conv{conv_no}", Conv3d(Conv3DSpec.same(channels, out, (1, 3, 3)), rng, dtype=dtype)),
            (f"bn{conv_no}", BatchNorm3d(out, dtype=dtype)),
            (f"relu{conv_no}", ReLU()),
        ]
        channels = out
    return Sequential(*layers), channels


def build_rcn(arch: ArchSpec, rng: np.random.Generator, dtype: np.dtype) -> Sequential:
    encoder, feature_size = build_encoder(arch, rng, dtype)
    hidden = arch.width(LSTM_HIDDEN)
    head = arch.width(HEAD_HIDDEN)
    return Sequential(
        ("encoder", encoder),
        ("frames", FrameSequence()),
        ("lstm", Lstm(LstmSpec(feature_size, hidden, LSTM_LAYERS), rng, dtype=dtype)),
        ("fc1", Linear(hidden, head, rng, dtype=dtype)),
        ("relu", ReLU()),
        ("fc2", Linear(head, arch.num_classes, rng, dtype=dtype)),
    )
