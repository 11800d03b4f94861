"""Step learning-rate schedule and SGD with momentum and coupled weight decay."""

from __future__ import annotations

from collections.abc import Mapping
from typing import Protocol

import numpy as np

from stfl.errors import DimensionError, NumericError
from stfl.models.network import Network

TensorMap = dict[str, np.ndarray]


class Schedule(Protocol):
    base_lr: float
    lr_step: int
    lr_gamma: float


def lr_at_epoch(config: Schedule, epoch: int) -> float:
    """base_lr * lr_gamma ** (epoch // lr_step)."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return config.base_lr * config.lr_gamma ** (epoch // config.lr_step)


def sgd_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    velocity: Mapping[str, np.ndarray],
    lr: float,
    momentum: float,
    weight_decay: float,
) -> tuple[TensorMap, TensorMap]:
    """One update: g' = g + wd*w; v = m*v + g'; w = w - lr*v.

    Missing velocity entries start at zero. Returns new parameters and
    velocities; inputs are not modified.
    """
    new_params: TensorMap = {}
    new_velocity: TensorMap = {}
    for name, w in params.items():
        if name not in grads:
            raise DimensionError(f"no gradient for parameter '{name}'")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != w.shape:
            raise DimensionError(f"gradient for '{name}' has shape {g.shape}, parameter {w.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for '{name}'", op="sgd_step")
        w64 = np.asarray(w, dtype=np.float64)
        v = momentum * np.asarray(velocity.get(name, 0.0), dtype=np.float64) + g + weight_decay * w64
        new_velocity[name] = v.astype(w.dtype)
        new_params[name] = (w64 - lr * v).astype(w.dtype)
    return new_params, new_velocity


class Sgd:
    """Applies :func:`sgd_step` to the trainable tensors of a network in place."""

    def __init__(self, network: Network, momentum: float = 0.9, weight_decay: float = 0.0005) -> None:
        self.network = network
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: TensorMap = {}

    def step(self, lr: float) -> None:
        tensors = dict(self.network.named_parameters())
        params = {name: t.data for name, t in tensors.items()}
        grads = {
            name: t.grad if t.grad is not None else np.zeros_like(t.data)
            for name, t in tensors.items()
        }
        new_params, self.velocity = sgd_step(
            params, grads, self.velocity, lr, self.momentum, self.weight_decay,
        )
        for name, tensor in tensors.items():
            tensor.data = new_params[name]

    def state_dict(self) -> TensorMap:
        return dict(self.velocity)

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        self.velocity = {name: np.array(v) for name, v in state.items()}
