"""Dense tensor holder and the precision policy of the numeric core.

Primitives in :mod:`stfl.ops` take and return ``numpy.ndarray`` values in
video layout ``(N, C, T, H, W)``. They accumulate in double precision and
cast results back to the storage precision of their inputs: single by
default, double when the inputs are double (gradient checking).

:class:`Tensor` pairs an array with its optional gradient buffer. Networks
use it for named parameters and batch-norm running statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stfl.errors import ConfigurationError, DimensionError, NumericError

PRECISIONS: dict[str, type[np.floating]] = {
    "single": np.float32,
    "double": np.float64,
}


def storage_dtype(precision: str) -> np.dtype:
    """Return the numpy dtype for a precision name (``single`` or ``double``)."""
    try:
        return np.dtype(PRECISIONS[precision])
    except KeyError:
        raise ConfigurationError(
            f"Unknown precision '{precision}'. Expected one of: {', '.join(PRECISIONS)}"
        ) from None


def as_compute(x: np.ndarray) -> np.ndarray:
    """View ``x`` as float64 for accumulation (copies only when needed)."""
    return np.asarray(x, dtype=np.float64)


def result_dtype(*arrays: np.ndarray | None) -> np.dtype:
    """Storage dtype of an op's result: double if any floating input is double."""
    for a in arrays:
        if a is not None and np.asarray(a).dtype == np.float64:
            return np.dtype(np.float64)
    return np.dtype(np.float32)


def ensure_finite(x: np.ndarray, op: str) -> np.ndarray:
    """Raise :class:`NumericError` naming ``op`` if ``x`` holds NaN or Inf."""
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite values produced", op=op)
    return x


def finish(x: np.ndarray, dtype: np.dtype, op: str) -> np.ndarray:
    """Cast an accumulated result to storage precision after a finiteness check."""
    return ensure_finite(x, op).astype(dtype, copy=False)


@dataclass(eq=False)
class Tensor:
    """Dense real array with an optional same-shape gradient buffer.

    ``trainable`` is False for buffers such as batch-norm running statistics;
    they are serialized with the network but excluded from parameter counts
    and optimizer updates.
    """

    data: np.ndarray
    grad: np.ndarray | None = None
    trainable: bool = True

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float32)
        if any(extent < 1 for extent in self.data.shape):
            raise DimensionError(f"Tensor extents must be positive, got {self.data.shape}")
        ensure_finite(self.data, "Tensor")
        if self.grad is not None and self.grad.shape != self.data.shape:
            raise DimensionError(
                f"Gradient shape {self.grad.shape} differs from data shape {self.data.shape}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """Add ``grad`` into the gradient buffer (allocated on first use)."""
        if grad.shape != self.data.shape:
            raise DimensionError(
                f"Gradient shape {grad.shape} differs from data shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad += grad
