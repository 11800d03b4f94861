"""Binary logistic regression on standardized spectrum features."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from stfl.errors import DataError, DimensionError, FormatError

logger = logging.getLogger(__name__)

_SCHEMA_VERSION = 1

DEFAULT_LR = 0.05
DEFAULT_L2 = 1e-4
DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITERS = 10_000


@dataclass
class LogRegModel:
    """Weights act on features standardized with the stored training statistics."""

    weights: np.ndarray
    bias: float = 0.0
    feature_means: np.ndarray | None = None
    feature_stds: np.ndarray | None = None
    iterations: int = 0
    final_loss: float = float("nan")
    loss_trace: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        dim = self.weights.size
        if self.feature_means is None:
            self.feature_means = np.zeros(dim)
        if self.feature_stds is None:
            self.feature_stds = np.ones(dim)
        self.feature_means = np.asarray(self.feature_means, dtype=np.float64)
        self.feature_stds = np.asarray(self.feature_stds, dtype=np.float64)
        if self.feature_means.shape != (dim,) or self.feature_stds.shape != (dim,):
            raise DimensionError("feature statistics must match the weight length")

    @classmethod
    def zeros(cls, dim: int) -> LogRegModel:
        return cls(np.zeros(dim))

    @property
    def dim(self) -> int:
        return int(self.weights.size)

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (features - self.feature_means) / self.feature_stds

    # -- plain-text model file ---------------------------------------------

    def to_text(self) -> str:
        def vec(v: np.ndarray) -> str:
            return ",".join(f"{x:.17g}" for x in v)

        return "\n".join([
            f"version: {_SCHEMA_VERSION}",
            f"weights: {vec(self.weights)}",
            f"bias: {self.bias:.17g}",
            f"feature_means: {vec(self.feature_means)}",  # type: ignore[arg-type]
            f"feature_stds: {vec(self.feature_stds)}",  # type: ignore[arg-type]
            f"iterations: {self.iterations}",
            f"final_loss: {self.final_loss:.17g}",
        ]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> LogRegModel:
        fields: dict[str, str] = {}
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            key, sep, value = line.partition(":")
            if not sep:
                raise FormatError(f"line {number}: expected 'key: value'")
            fields[key.strip()] = value.strip()
        try:
            version = int(fields["version"])
            if version != _SCHEMA_VERSION:
                raise FormatError(f"unsupported model version {version}")
            model = cls(
                weights=_parse_vector(fields["weights"]),
                bias=float(fields["bias"]),
                feature_means=_parse_vector(fields["feature_means"]),
                feature_stds=_parse_vector(fields["feature_stds"]),
                iterations=int(fields.get("iterations", 0)),
                final_loss=float(fields.get("final_loss", "nan")),
            )
        except KeyError as e:
            raise FormatError(f"model file is missing '{e.args[0]}'") from None
        except ValueError as e:
            raise FormatError(f"malformed model file: {e}") from None
        if not (np.all(np.isfinite(model.weights)) and np.isfinite(model.bias)):
            raise FormatError("model file holds non-finite weights")
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> LogRegModel:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")], dtype=np.float64)


def loss_and_grad(
    weights: np.ndarray, bias: float, x: np.ndarray, y: np.ndarray, l2: float,
) -> tuple[float, np.ndarray, float]:
    """Mean negative log-likelihood plus (l2 / 2)·|w|², with its gradient."""
    z = x @ weights + bias
    # log(1 + e^z) - y z, written stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * weights @ weights)
    residual = expit(z) - y
    grad_w = x.T @ residual / x.shape[0] + l2 * weights
    grad_b = float(residual.mean())
    return loss, grad_w, grad_b


def logreg_train(
    features: np.ndarray,
    labels: np.ndarray,
    *,
    l2: float = DEFAULT_L2,
    lr: float = DEFAULT_LR,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> LogRegModel:
    """Full-batch gradient descent; stops when the gradient norm drops below ``tol``."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise DimensionError(f"features {x.shape} and labels {y.shape} disagree")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise DataError("labels must be 0 (real) or 1 (fake)")
    if y.min() == y.max():
        raise DataError("logistic regression needs samples of both classes")

    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds[stds == 0] = 1.0
    xs = (x - means) / stds

    # step capped at 1/L, L bounding the curvature of the loss
    smoothness = np.linalg.norm(np.hstack([xs, np.ones((xs.shape[0], 1))]), 2) ** 2 / (4 * xs.shape[0]) + l2
    step = min(lr, 1.0 / smoothness)
    if step < lr:
        logger.debug("Logistic regression step capped at %.4g (requested %.4g)", step, lr)

    w = np.zeros(x.shape[1])
    b = 0.0
    trace: list[float] = []
    iterations = 0
    for iterations in range(1, max_iters + 1):
        loss, grad_w, grad_b = loss_and_grad(w, b, xs, y, l2)
        trace.append(loss)
        if np.sqrt(grad_w @ grad_w + grad_b * grad_b) < tol:
            break
        w -= step * grad_w
        b -= step * grad_b
    final_loss = loss_and_grad(w, b, xs, y, l2)[0]
    logger.info("Logistic regression: %d iterations, loss %.6f", iterations, final_loss)
    return LogRegModel(w, b, means, stds, iterations, final_loss, trace)


def logreg_predict_batch(model: LogRegModel, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DimensionError(f"features must have length {model.dim}, got shape {x.shape}")
    return expit(model.standardize(x) @ model.weights + model.bias)


def logreg_predict(model: LogRegModel, feature: np.ndarray) -> float:
    """Probability that ``feature`` comes from a fake frame."""
    x = np.asarray(feature, dtype=np.float64)
    if x.shape != (model.dim,):
        raise DimensionError(f"feature must have length {model.dim}, got {x.shape}")
    return float(logreg_predict_batch(model, x[None, :])[0])
