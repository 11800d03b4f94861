"""Softmax and class-weighted softmax cross-entropy."""

from __future__ import annotations

import numpy as np
from scipy.special import log_softmax

from stfl.errors import DataError, DimensionError
from stfl.tensor import as_compute, ensure_finite, finish, result_dtype


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of (N, K) logits, computed in double precision."""
    return np.exp(log_softmax(as_compute(logits), axis=1))


def weighted_softmax_cross_entropy(
    logits: np.ndarray,
    labels: np.ndarray,
    class_weights: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Mean over samples of ``w[y_i] * -log softmax(logits_i)[y_i]``.

    Returns the scalar loss and its gradient w.r.t. ``logits``.
    """
    if logits.ndim != 2:
        raise DimensionError(f"logits must be (N, K), got rank {logits.ndim}")
    n, k = logits.shape
    weights = as_compute(class_weights)
    if weights.shape != (k,):
        raise DimensionError(f"class_weights must have length {k}, got {weights.shape}")
    if np.any(weights <= 0):
        raise DataError(f"class weights must be positive, got {weights.tolist()}")
    y = np.asarray(labels)
    if y.shape != (n,):
        raise DimensionError(f"labels must have shape ({n},), got {y.shape}")
    if not np.all(np.isin(y, np.arange(k))):
        bad = y[~np.isin(y, np.arange(k))][0]
        raise DataError(f"label {bad!r} outside {{0..{k - 1}}}")
    y = y.astype(np.int64)

    log_p = log_softmax(as_compute(logits), axis=1)
    w = weights[y]
    rows = np.arange(n)
    loss = float(np.mean(-w * log_p[rows, y]))

    grad = np.exp(log_p)
    grad[rows, y] -= 1.0
    grad *= (w / n)[:, None]
    ensure_finite(np.array(loss), "weighted_softmax_cross_entropy")
    return loss, finish(grad, result_dtype(logits), "weighted_softmax_cross_entropy")
