"""18-layer residual video networks: R3D, MC3 and R(2+1)D."""

from __future__ import annotations

import numpy as np

from stfl.constants import Family
from stfl.errors import ConfigurationError
from stfl.models.arch import ArchSpec
from stfl.models.layers import (
    BatchNorm3d,
    Conv3d,
    Flatten,
    Layer,
    Linear,
    Pool3d,
    ReLU,
    Sequential,
)
from stfl.ops import Conv3DSpec, relu, relu_backward
from stfl.ops.conv import Triple

STAGE_WIDTHS = (64, 128, 256, 512)
BLOCKS_PER_STAGE = 2
FULL_KERNEL: Triple = (3, 3, 3)
FLAT_KERNEL: Triple = (1, 3, 3)


def midplanes(n_prev: int, n_out: int, t: int = 3, d: int = 3) -> int:
    """Midplane count M equating a (1,d,d)+(t,1,1) pair with a full (t,d,d) conv.

    M = floor(t d^2 N_prev N_out / (d^2 N_prev + t N_out)).
    """
    if min(n_prev, n_out, t, d) < 1:
        raise ConfigurationError("midplanes arguments must be positive")
    return (t * d * d * n_prev * n_out) // (d * d * n_prev + t * n_out)


class Conv2Plus1d(Layer):
    """(1,d,d) spatial conv -> BN -> ReLU -> (t,1,1) temporal conv.

    Stride (s_t, s_h, s_w) is split: spatial stride on the first conv,
    temporal stride on the second.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        mid_channels: int,
        rng: np.random.Generator,
        *,
        stride: Triple = (1, 1, 1),
        t: int = 3,
        d: int = 3,
        dtype: np.dtype = np.dtype(np.float32),
    ) -> None:
        super().__init__()
        st, sh, sw = stride
        self.spatial = self.add("spatial", Conv3d(
            Conv3DSpec.same(in_channels, mid_channels, (1, d, d), (1, sh, sw)), rng, dtype=dtype))
        self.add("bn", BatchNorm3d(mid_channels, dtype=dtype))
        self.add("relu", ReLU())
        self.temporal = self.add("temporal", Conv3d(
            Conv3DSpec.same(mid_channels, out_channels, (t, 1, 1), (st, 1, 1)), rng, dtype=dtype))

    def forward(self, x: np.ndarray) -> np.ndarray:
        for _, layer in self.children():
            x = layer.forward(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for _, layer in reversed(list(self.children())):
            grad = layer.backward(grad)
        return grad


class BasicBlock(Layer):
    """Two convolutions with an identity or projected skip connection."""

    def __init__(
        self,
        family: Family,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        *,
        stride: int = 1,
        flat: bool = False,
        dtype: np.dtype = np.dtype(np.float32),
    ) -> None:
        super().__init__()
        strides: Triple = (stride, stride, stride)
        if family is Family.R2PLUS1D:
            # conv2 reuses the (in, out) M, so its own pair can exceed a full conv; total stays 31.29M
            mid = midplanes(in_channels, out_channels)
            self.add("conv1", Conv2Plus1d(in_channels, out_channels, mid, rng, stride=strides, dtype=dtype))
            self.add("bn1", BatchNorm3d(out_channels, dtype=dtype))
            self.add("relu1", ReLU())
            self.add("conv2", Conv2Plus1d(out_channels, out_channels, mid, rng, dtype=dtype))
        else:
            kernel = FLAT_KERNEL if flat else FULL_KERNEL
            self.add("conv1", Conv3d(Conv3DSpec.same(in_channels, out_channels, kernel, strides), rng, dtype=dtype))
            self.add("bn1", BatchNorm3d(out_channels, dtype=dtype))
            self.add("relu1", ReLU())
            self.add("conv2", Conv3d(Conv3DSpec.same(out_channels, out_channels, kernel), rng, dtype=dtype))
        self.add("bn2", BatchNorm3d(out_channels, dtype=dtype))
        self.downsample: Sequential | None = None
        if stride != 1 or in_channels != out_channels:
            self.downsample = Sequential(
                ("conv", Conv3d(Conv3DSpec(in_channels, out_channels, (1, 1, 1), strides), rng, dtype=dtype)),
                ("bn", BatchNorm3d(out_channels, dtype=dtype)),
            )
            self.add("downsample", self.downsample)

    def _path(self) -> list[Layer]:
        return [layer for name, layer in self.children() if name != "downsample"]

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = x
        for layer in self._path():
            out = layer.forward(out)
        skip = self.downsample.forward(x) if self.downsample is not None else x
        y, ctx = relu(out + skip)
        self._keep(ctx)
        return y

    def backward(self, grad: np.ndarray) -> np.ndarray:
        g = relu_backward(grad, self._context())  # type: ignore[arg-type]
        g_path = g
        for layer in reversed(self._path()):
            g_path = layer.backward(g_path)
        g_skip = self.downsample.backward(g) if self.downsample is not None else g
        return g_path + g_skip


def _stem(arch: ArchSpec, rng: np.random.Generator, dtype: np.dtype) -> Sequential:
    width = arch.width(STAGE_WIDTHS[0])
    if arch.family is Family.R2PLUS1D:
        conv: Layer = Conv2Plus1d(3, width, midplanes(3, width), rng, stride=(1, 2, 2), dtype=dtype)
    else:
        conv = Conv3d(Conv3DSpec.same(3, width, FULL_KERNEL, (1, 2, 2)), rng, dtype=dtype)
    return Sequential(("conv", conv), ("bn", BatchNorm3d(width, dtype=dtype)), ("relu", ReLU()))


def build_resnet(arch: ArchSpec, rng: np.random.Generator, dtype: np.dtype) -> Sequential:
    """stem -> stage2..stage5 -> global pool -> fc.

    Stages 3-5 open with a stride-2 block; MC3 switches those stages to
    (1,3,3) kernels.
    """
    layers: list[tuple[str, Layer]] = [("stem", _stem(arch, rng, dtype))]
    in_channels = arch.width(STAGE_WIDTHS[0])
    for index, base in enumerate(STAGE_WIDTHS):
        stage_no = index + 2
        out_channels = arch.width(base)
        flat = arch.family is Family.MC3 and stage_no >= 3
        blocks: list[tuple[str, Layer]] = []
        for b in range(BLOCKS_PER_STAGE):
            stride = 2 if (b == 0 and stage_no >= 3) else 1
            blocks.append((str(b), BasicBlock(
                arch.family, in_channels, out_channels, rng, stride=stride, flat=flat, dtype=dtype,
            )))
            in_channels = out_channels
        layers.append((f"stage{stage_no}", Sequential(*blocks)))
    layers += [
        ("pool", Pool3d("global_avg")),
        ("flatten", Flatten()),
        ("fc", Linear(in_channels, arch.num_classes, rng, dtype=dtype)),
    ]
    return Sequential(*layers)
