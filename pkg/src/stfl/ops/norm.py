"""Per-channel batch normalization over (N, T, H, W)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stfl.constants import BN_EPS, BN_MOMENTUM
from stfl.errors import DimensionError, NumericError, StateError
from stfl.tensor import as_compute, finish, result_dtype

_REDUCE = (0, 2, 3, 4)


def _per_channel(v: np.ndarray) -> np.ndarray:
    return v.reshape(1, -1, 1, 1, 1)


@dataclass(frozen=True)
class RunningStats:
    mean: np.ndarray
    var: np.ndarray


@dataclass(frozen=True)
class BatchNormContext:
    training: bool
    x_hat: np.ndarray
    inv_std: np.ndarray  # per channel
    gamma: np.ndarray
    dtype: np.dtype


def batchnorm(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    *,
    training: bool,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    eps: float = BN_EPS,
    momentum: float = BN_MOMENTUM,
) -> tuple[np.ndarray, BatchNormContext, RunningStats]:
    """Normalize per channel, then apply ``gamma * x_hat + beta``.

    Training mode normalizes with the biased batch variance and returns
    running statistics updated with the unbiased one; eval mode normalizes
    with the running statistics and returns them unchanged.
    """
    if x.ndim != 5:
        raise DimensionError(f"batchnorm expects (N, C, T, H, W) input, got rank {x.ndim}")
    c = x.shape[1]
    for name, v in (("gamma", gamma), ("beta", beta), ("running_mean", running_mean), ("running_var", running_var)):
        if v.shape != (c,):
            raise DimensionError(f"{name} has shape {v.shape}, expected ({c},)", axis="C")
    xc = as_compute(x)
    dtype = result_dtype(x, gamma)

    if training:
        count = x.size // c
        if count == 1 and eps == 0:
            raise NumericError("single-element normalization set with epsilon 0", op="batchnorm")
        mean = xc.mean(axis=_REDUCE)
        var = xc.var(axis=_REDUCE)
        unbiased = var * count / (count - 1) if count > 1 else var
        running = RunningStats(
            (1 - momentum) * as_compute(running_mean) + momentum * mean,
            (1 - momentum) * as_compute(running_var) + momentum * unbiased,
        )
        running = RunningStats(running.mean.astype(running_mean.dtype), running.var.astype(running_var.dtype))
    else:
        mean = as_compute(running_mean)
        var = as_compute(running_var)
        running = RunningStats(running_mean, running_var)

    denom = var + eps
    if np.any(denom <= 0):
        raise NumericError("zero variance with epsilon 0", op="batchnorm")
    inv_std = 1.0 / np.sqrt(denom)
    x_hat = (xc - _per_channel(mean)) * _per_channel(inv_std)
    g = as_compute(gamma)
    out = x_hat * _per_channel(g) + _per_channel(as_compute(beta))

    ctx = BatchNormContext(training, x_hat, inv_std, g, dtype)
    return finish(out, dtype, "batchnorm"), ctx, running


def batchnorm_backward(
    grad_out: np.ndarray, ctx: BatchNormContext | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients w.r.t. input, gamma and beta."""
    if ctx is None:
        raise StateError("batchnorm_backward called without a forward context")
    if grad_out.shape != ctx.x_hat.shape:
        raise DimensionError(
            f"grad_out shape {grad_out.shape} differs from forward output {ctx.x_hat.shape}"
        )
    g = as_compute(grad_out)
    grad_gamma = (g * ctx.x_hat).sum(axis=_REDUCE)
    grad_beta = g.sum(axis=_REDUCE)
    d_hat = g * _per_channel(ctx.gamma)
    inv_std = _per_channel(ctx.inv_std)

    if ctx.training:
        count = g.size // g.shape[1]
        sum_d = _per_channel(d_hat.sum(axis=_REDUCE))
        sum_dx = _per_channel((d_hat * ctx.x_hat).sum(axis=_REDUCE))
        grad_x = inv_std / count * (count * d_hat - sum_d - ctx.x_hat * sum_dx)
    else:
        grad_x = d_hat * inv_std

    return (
        finish(grad_x, ctx.dtype, "batchnorm_backward"),
        finish(grad_gamma, ctx.dtype, "batchnorm_backward"),
        finish(grad_beta, ctx.dtype, "batchnorm_backward"),
    )
