"""ReLU and fully connected layers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stfl.errors import DimensionError, StateError
from stfl.tensor import as_compute, finish, result_dtype


@dataclass(frozen=True)
class ReluContext:
    mask: np.ndarray
    dtype: np.dtype


def relu(x: np.ndarray) -> tuple[np.ndarray, ReluContext]:
    """Elementwise max(0, x)."""
    mask = x > 0
    out = np.where(mask, x, 0).astype(x.dtype, copy=False)
    return out, ReluContext(mask, result_dtype(x))


def relu_backward(grad_out: np.ndarray, ctx: ReluContext | None) -> np.ndarray:
    if ctx is None:
        raise StateError("relu_backward called without a forward context")
    if grad_out.shape != ctx.mask.shape:
        raise DimensionError(f"grad_out shape {grad_out.shape} differs from input {ctx.mask.shape}")
    return np.where(ctx.mask, grad_out, 0).astype(ctx.dtype, copy=False)


@dataclass(frozen=True)
class LinearContext:
    x: np.ndarray
    weights: np.ndarray
    has_bias: bool
    dtype: np.dtype


def linear(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray | None = None,
) -> tuple[np.ndarray, LinearContext]:
    """Affine map ``x @ weights.T + bias`` with x (N, F) and weights (F', F)."""
    if x.ndim != 2 or weights.ndim != 2:
        raise DimensionError(f"linear expects rank-2 input and weights, got {x.ndim} and {weights.ndim}")
    if x.shape[1] != weights.shape[1]:
        raise DimensionError(
            f"inner extents disagree: input has {x.shape[1]} features, weights expect {weights.shape[1]}",
            axis="F",
        )
    if bias is not None and bias.shape != (weights.shape[0],):
        raise DimensionError(f"bias shape {bias.shape} must be ({weights.shape[0]},)", axis="bias")
    xc = as_compute(x)
    w = as_compute(weights)
    out = xc @ w.T
    if bias is not None:
        out = out + as_compute(bias)
    dtype = result_dtype(x, weights)
    return finish(out, dtype, "linear"), LinearContext(xc, w, bias is not None, dtype)


def linear_backward(
    grad_out: np.ndarray, ctx: LinearContext | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Gradients w.r.t. input, weights and bias."""
    if ctx is None:
        raise StateError("linear_backward called without a forward context")
    if grad_out.shape != (ctx.x.shape[0], ctx.weights.shape[0]):
        raise DimensionError(f"grad_out shape {grad_out.shape} does not match linear output")
    g = as_compute(grad_out)
    grad_x = g @ ctx.weights
    grad_w = g.T @ ctx.x
    grad_b = g.sum(axis=0) if ctx.has_bias else None
    return (
        finish(grad_x, ctx.dtype, "linear_backward"),
        finish(grad_w, ctx.dtype, "linear_backward"),
        None if grad_b is None else finish(grad_b, ctx.dtype, "linear_backward"),
    )
