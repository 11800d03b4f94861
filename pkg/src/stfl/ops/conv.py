"""3D convolution (cross-correlation, no kernel flip) and its analytic backward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stfl.errors import ConfigurationError, DimensionError, StateError
from stfl.tensor import as_compute, finish, result_dtype

Triple = tuple[int, int, int]

_AXES = ("T", "H", "W")


def output_extent(size: int, kernel: int, stride: int, padding: int, axis: str) -> int:
    """floor((size + 2p - k) / s) + 1, or :class:`DimensionError` if not positive."""
    span = size + 2 * padding - kernel
    if span < 0:
        raise DimensionError(
            f"window {kernel} does not fit input extent {size} with padding {padding}",
            axis=axis,
        )
    return span // stride + 1


def output_extents(
    extents: tuple[int, ...], kernel: Triple, stride: Triple, padding: Triple,
) -> Triple:
    """Apply :func:`output_extent` to the (T, H, W) axes."""
    return tuple(  # type: ignore[return-value]
        output_extent(n, k, s, p, axis)
        for n, k, s, p, axis in zip(extents, kernel, stride, padding, _AXES)
    )


def window_slices(offset: Triple, stride: Triple, out: Triple) -> tuple[slice, ...]:
    """Slices of the padded input touched by kernel ``offset`` for every output site."""
    return (slice(None), slice(None)) + tuple(
        slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(offset, stride, out)
    )


@dataclass(frozen=True)
class Conv3DSpec:
    """Geometry of a 3D convolution; weights are (out, in, k_t, k_h, k_w)."""

    in_channels: int
    out_channels: int
    kernel: Triple = (3, 3, 3)
    stride: Triple = (1, 1, 1)
    padding: Triple = (0, 0, 0)
    has_bias: bool = False

    def __post_init__(self) -> None:
        if self.in_channels < 1 or self.out_channels < 1:
            raise ConfigurationError(
                f"channel counts must be positive, got {self.in_channels}->{self.out_channels}"
            )
        if len(self.kernel) != 3 or min(self.kernel) < 1:
            raise ConfigurationError(f"kernel extents must be >= 1, got {self.kernel}")
        if len(self.stride) != 3 or min(self.stride) < 1:
            raise ConfigurationError(f"stride extents must be >= 1, got {self.stride}")
        if len(self.padding) != 3 or min(self.padding) < 0:
            raise ConfigurationError(f"padding extents must be >= 0, got {self.padding}")

    @classmethod
    def same(
        cls,
        in_channels: int,
        out_channels: int,
        kernel: Triple,
        stride: Triple = (1, 1, 1),
        *,
        has_bias: bool = False,
    ) -> Conv3DSpec:
        """Spec with zero "same"-style padding p = k // 2 on every axis."""
        return cls(
            in_channels, out_channels, kernel, stride,
            tuple(k // 2 for k in kernel), has_bias,  # type: ignore[arg-type]
        )

    @property
    def weight_shape(self) -> tuple[int, int, int, int, int]:
        return (self.out_channels, self.in_channels, *self.kernel)

    @property
    def param_count(self) -> int:
        n = int(np.prod(self.weight_shape))
        return n + (self.out_channels if self.has_bias else 0)


@dataclass(frozen=True)
class Conv3DContext:
    """Forward cache needed by :func:`conv3d_backward`."""

    spec: Conv3DSpec
    padded_input: np.ndarray  # float64, (N, C, T+2p, H+2p, W+2p)
    weights: np.ndarray  # float64
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]
    dtype: np.dtype


def _check_input(x: np.ndarray, spec: Conv3DSpec, weights: np.ndarray, bias: np.ndarray | None) -> None:
    if x.ndim != 5:
        raise DimensionError(f"conv3d expects (N, C, T, H, W) input, got rank {x.ndim}")
    if x.shape[1] != spec.in_channels:
        raise DimensionError(
            f"input has {x.shape[1]} channels, spec expects {spec.in_channels}", axis="C",
        )
    if weights.shape != spec.weight_shape:
        raise DimensionError(
            f"weights shape {weights.shape} does not match spec {spec.weight_shape}",
            axis="weights",
        )
    if spec.has_bias and (bias is None or bias.shape != (spec.out_channels,)):
        raise DimensionError(
            f"bias must have shape ({spec.out_channels},)", axis="bias",
        )


def conv3d(
    x: np.ndarray,
    spec: Conv3DSpec,
    weights: np.ndarray,
    bias: np.ndarray | None = None,
) -> tuple[np.ndarray, Conv3DContext]:
    """Zero-padded strided 3D cross-correlation.

    Loops over kernel offsets; each offset is one matrix product between the
    (out, in) weight slice and the strided input view, so memory stays at one
    input-sized buffer regardless of kernel volume.
    """
    _check_input(x, spec, weights, bias)
    n, _, *extents = x.shape
    out_ext = output_extents(tuple(extents), spec.kernel, spec.stride, spec.padding)
    pt, ph, pw = spec.padding
    xp = np.pad(as_compute(x), ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)))
    w = as_compute(weights)

    # accumulate as (out, N, T', H', W') so tensordot output needs no transpose
    acc = np.zeros((spec.out_channels, n, *out_ext))
    for offset in np.ndindex(*spec.kernel):
        patch = xp[window_slices(offset, spec.stride, out_ext)]
        acc += np.tensordot(w[(slice(None), slice(None), *offset)], patch, axes=(1, 1))
    if spec.has_bias and bias is not None:
        acc += as_compute(bias).reshape(-1, 1, 1, 1, 1)

    out = acc.transpose(1, 0, 2, 3, 4)
    dtype = result_dtype(x, weights)
    ctx = Conv3DContext(spec, xp, w, x.shape, out.shape, dtype)
    return finish(out, dtype, "conv3d"), ctx


def conv3d_backward(
    grad_out: np.ndarray, ctx: Conv3DContext | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Gradients w.r.t. input, weights and bias (None for a bias-free convolution)."""
    if ctx is None:
        raise StateError("conv3d_backward called without a forward context")
    if grad_out.shape != ctx.output_shape:
        raise DimensionError(
            f"grad_out shape {grad_out.shape} differs from forward output {ctx.output_shape}"
        )
    spec = ctx.spec
    g = as_compute(grad_out)
    out_ext = ctx.output_shape[2:]
    grad_xp = np.zeros_like(ctx.padded_input)
    grad_w = np.zeros_like(ctx.weights)

    for offset in np.ndindex(*spec.kernel):
        sl = window_slices(offset, spec.stride, out_ext)
        w_slice = (slice(None), slice(None), *offset)
        grad_w[w_slice] = np.tensordot(g, ctx.padded_input[sl], axes=([0, 2, 3, 4], [0, 2, 3, 4]))
        grad_xp[sl] += np.tensordot(ctx.weights[w_slice], g, axes=(0, 1)).transpose(1, 0, 2, 3, 4)

    pt, ph, pw = spec.padding
    _, _, t, h, w = ctx.input_shape
    grad_x = grad_xp[:, :, pt:pt + t, ph:ph + h, pw:pw + w]
    grad_b = g.sum(axis=(0, 2, 3, 4)) if spec.has_bias else None

    return (
        finish(grad_x, ctx.dtype, "conv3d_backward"),
        finish(grad_w, ctx.dtype, "conv3d_backward"),
        None if grad_b is None else finish(grad_b, ctx.dtype, "conv3d_backward"),
    )
