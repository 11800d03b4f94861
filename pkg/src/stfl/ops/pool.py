"""3D max / average / global-average pooling and backward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stfl.errors import ConfigurationError, DimensionError, StateError
from stfl.ops.conv import Triple, output_extents, window_slices
from stfl.tensor import as_compute, finish, result_dtype

POOL_KINDS = ("max", "avg", "global_avg")


@dataclass(frozen=True)
class PoolContext:
    kind: str
    window: Triple
    stride: Triple
    padding: Triple
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]
    dtype: np.dtype
    argmax: np.ndarray | None = None  # flat kernel-offset index per output (max only)


def pool3d(
    x: np.ndarray,
    kind: str,
    window: Triple = (1, 1, 1),
    stride: Triple | None = None,
    padding: Triple = (0, 0, 0),
) -> tuple[np.ndarray, PoolContext]:
    """Pool over (T, H, W). ``stride`` defaults to ``window``.

    Max pooling pads with -inf so padded sites never win; average pooling
    pads with zeros and always divides by the full window volume.
    """
    if kind not in POOL_KINDS:
        raise ConfigurationError(f"Unknown pool kind '{kind}'. Expected one of: {', '.join(POOL_KINDS)}")
    if x.ndim != 5:
        raise DimensionError(f"pool3d expects (N, C, T, H, W) input, got rank {x.ndim}")
    dtype = result_dtype(x)

    if kind == "global_avg":
        out = as_compute(x).mean(axis=(2, 3, 4), keepdims=True)
        ctx = PoolContext(kind, tuple(x.shape[2:]), (1, 1, 1), (0, 0, 0), x.shape, out.shape, dtype)  # type: ignore[arg-type]
        return finish(out, dtype, "pool3d"), ctx

    stride = stride or window
    if any(p >= k for p, k in zip(padding, window)):
        raise ConfigurationError(f"padding {padding} must be smaller than window {window}")
    out_ext = output_extents(tuple(x.shape[2:]), window, stride, padding)
    pads = ((0, 0), (0, 0)) + tuple((p, p) for p in padding)
    fill = -np.inf if kind == "max" else 0.0
    xp = np.pad(as_compute(x), pads, constant_values=fill)
    out_shape = x.shape[:2] + out_ext

    argmax = None
    if kind == "max":
        out = np.full(out_shape, -np.inf)
        argmax = np.zeros(out_shape, dtype=np.int64)
        for idx, offset in enumerate(np.ndindex(*window)):
            patch = xp[window_slices(offset, stride, out_ext)]
            better = patch > out  # first maximum wins ties
            out = np.where(better, patch, out)
            argmax[better] = idx
    else:
        out = np.zeros(out_shape)
        for offset in np.ndindex(*window):
            out += xp[window_slices(offset, stride, out_ext)]
        out /= float(np.prod(window))

    ctx = PoolContext(kind, window, stride, padding, x.shape, out.shape, dtype, argmax)
    return finish(out, dtype, "pool3d"), ctx


def pool3d_backward(grad_out: np.ndarray, ctx: PoolContext | None) -> np.ndarray:
    """Gradient w.r.t. the pooling input."""
    if ctx is None:
        raise StateError("pool3d_backward called without a forward context")
    if grad_out.shape != ctx.output_shape:
        raise DimensionError(
            f"grad_out shape {grad_out.shape} differs from forward output {ctx.output_shape}"
        )
    g = as_compute(grad_out)

    if ctx.kind == "global_avg":
        volume = float(np.prod(ctx.input_shape[2:]))
        grad = np.broadcast_to(g / volume, ctx.input_shape)
        return finish(np.array(grad), ctx.dtype, "pool3d_backward")

    n, c, t, h, w = ctx.input_shape
    pt, ph, pw = ctx.padding
    grad_xp = np.zeros((n, c, t + 2 * pt, h + 2 * ph, w + 2 * pw))
    out_ext = ctx.output_shape[2:]
    volume = float(np.prod(ctx.window))
    for idx, offset in enumerate(np.ndindex(*ctx.window)):
        sl = window_slices(offset, ctx.stride, out_ext)
        if ctx.kind == "max":
            assert ctx.argmax is not None
            grad_xp[sl] += np.where(ctx.argmax == idx, g, 0.0)
        else:
            grad_xp[sl] += g / volume

    grad = grad_xp[:, :, pt:pt + t, ph:ph + h, pw:pw + w]
    return finish(grad, ctx.dtype, "pool3d_backward")
