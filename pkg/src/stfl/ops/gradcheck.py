"""Central finite-difference gradient checker.

A checked function maps named float64 arrays to ``(loss, grads)`` where
``grads`` holds the analytic gradient of the scalar loss for every name.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from stfl.constants import GRADCHECK_MAX_COORDS, GRADCHECK_STEP, GRADCHECK_TOL
from stfl.errors import DimensionError, NumericError

logger = logging.getLogger(__name__)

LossFn = Callable[[dict[str, np.ndarray]], tuple[float, dict[str, np.ndarray]]]

_DENOM_FLOOR = 1e-8


@dataclass
class GradcheckReport:
    """Per-tensor maximum relative error between analytic and numeric gradients."""

    op: str
    errors: dict[str, float] = field(default_factory=dict)
    tolerance: float = GRADCHECK_TOL
    step: float = GRADCHECK_STEP

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def summary(self) -> str:
        status = "ok" if self.passed else "FAIL"
        parts = ", ".join(f"{name}={err:.2e}" for name, err in self.errors.items())
        return f"{self.op}: {status} max_rel_err={self.max_error:.2e} ({parts})"


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(|a|, |n|, 1e-8), elementwise."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), _DENOM_FLOOR)
    return np.abs(analytic - numeric) / denom


def projection(shape: tuple[int, ...], seed: int) -> np.ndarray:
    """Fixed random weights turning a tensor-valued op into a scalar loss."""
    return np.random.default_rng(seed).standard_normal(shape)


def _evaluate(fn: LossFn, params: dict[str, np.ndarray], op: str) -> float:
    loss, _ = fn(params)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss during finite differences", op=op)
    return float(loss)


def gradcheck(
    fn: LossFn,
    inputs: Mapping[str, np.ndarray],
    *,
    op: str = "op",
    tol: float = GRADCHECK_TOL,
    step: float = GRADCHECK_STEP,
    max_coords: int = GRADCHECK_MAX_COORDS,
    seed: int = 0,
) -> GradcheckReport:
    """Compare analytic gradients with central differences in double precision.

    At most ``max_coords`` randomly chosen coordinates are perturbed per tensor.
    Evaluation is serial so the report is deterministic for a fixed seed.
    """
    params = {name: np.array(value, dtype=np.float64) for name, value in inputs.items()}
    loss, analytic = fn(params)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss", op=op)
    rng = np.random.default_rng(seed)
    report = GradcheckReport(op=op, tolerance=tol, step=step)

    for name, value in params.items():
        if name not in analytic:
            raise DimensionError(f"{op} returned no gradient for '{name}'")
        grad = np.asarray(analytic[name], dtype=np.float64)
        if grad.shape != value.shape:
            raise DimensionError(f"{op} gradient for '{name}' has shape {grad.shape}, expected {value.shape}")
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite analytic gradient for '{name}'", op=op)

        flat = value.reshape(-1)
        count = min(flat.size, max_coords)
        coords = np.sort(rng.choice(flat.size, size=count, replace=False))
        numeric = np.empty(count)
        for j, idx in enumerate(coords):
            original = flat[idx]
            flat[idx] = original + step
            f_plus = _evaluate(fn, params, op)
            flat[idx] = original - step
            f_minus = _evaluate(fn, params, op)
            flat[idx] = original
            numeric[j] = (f_plus - f_minus) / (2.0 * step)

        errors = relative_error(grad.reshape(-1)[coords], numeric)
        report.errors[name] = float(errors.max())

    logger.debug("%s", report.summary())
    return report
