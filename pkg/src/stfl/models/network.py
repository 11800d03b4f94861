"""Network wrapper: construction, forward/backward, parameter access."""

from __future__ import annotations

import logging
from collections.abc import Iterator

import numpy as np

from stfl.constants import Family
from stfl.errors import DimensionError, StateMismatchError
from stfl.models.arch import ArchSpec
from stfl.models.inception import build_i3d
from stfl.models.layers import Layer, Sequential
from stfl.models.rcn import build_rcn
from stfl.models.resnet import build_resnet
from stfl.tensor import Tensor, storage_dtype

logger = logging.getLogger(__name__)

_BUILDERS = {
    Family.R3D: build_resnet,
    Family.MC3: build_resnet,
    Family.R2PLUS1D: build_resnet,
    Family.I3D: build_i3d,
    Family.RCN: build_rcn,
}


class Network:
    """A built detector: architecture, layer graph and mode flag.

    Parameters are drawn from ``numpy.random.default_rng(seed)`` in
    construction order, so equal ``(arch, seed)`` pairs give bitwise-identical
    weights.
    """

    def __init__(self, arch: ArchSpec, body: Sequential, *, precision: str = "single") -> None:
        self.arch = arch
        self.body = body
        self.precision = precision
        names = [name for name, _ in body.named_tensors()]
        if len(names) != len(set(names)):
            raise ValueError("duplicate tensor names in network")

    @property
    def training(self) -> bool:
        return self.body.training

    def train(self, mode: bool = True) -> None:
        self.body.train(mode)

    def eval(self) -> None:
        self.body.train(False)

    # -- tensors ----------------------------------------------------------

    def named_tensors(self) -> Iterator[tuple[str, Tensor]]:
        """Parameters and running statistics, in construction order."""
        return self.body.named_tensors()

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        return ((name, t) for name, t in self.body.named_tensors() if t.trainable)

    def zero_grad(self) -> None:
        for _, tensor in self.named_parameters():
            tensor.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: tensor.data for name, tensor in self.named_tensors()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """Copy ``state`` into this network.

        Raises :class:`StateMismatchError` naming the first tensor of this
        network that is missing from ``state`` or has a different shape.
        """
        targets = list(self.named_tensors())
        for name, tensor in targets:
            if name not in state:
                raise StateMismatchError(f"missing parameter '{name}'", name)
            if state[name].shape != tensor.shape:
                raise StateMismatchError(
                    f"shape mismatch for '{name}': file {state[name].shape}, network {tensor.shape}", name,
                )
        extra = set(state) - {name for name, _ in targets}
        if extra:
            name = sorted(extra)[0]
            raise StateMismatchError(f"unexpected parameter '{name}'", name)
        for name, tensor in targets:
            tensor.data = np.array(state[name], dtype=tensor.dtype)

    # -- computation ------------------------------------------------------

    def check_input(self, clips: np.ndarray) -> None:
        expected = self.arch.shape
        if clips.ndim != 5 or tuple(clips.shape[1:]) != expected:
            raise DimensionError(
                f"clips have shape {tuple(clips.shape)}, expected (N, {', '.join(map(str, expected))})",
            )

    def forward(self, clips: np.ndarray) -> np.ndarray:
        self.check_input(clips)
        return self.body.forward(np.asarray(clips, dtype=storage_dtype(self.precision)))

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        return self.body.backward(grad_logits)

    def trace(self, clips: np.ndarray) -> list[tuple[str, tuple[int, ...]]]:
        """Forward pass recording the output shape of every top-level layer."""
        self.check_input(clips)
        x = np.asarray(clips, dtype=storage_dtype(self.precision))
        shapes = []
        for name, layer in self.body.children():
            x = layer.forward(x)
            shapes.append((name, tuple(x.shape)))
        return shapes


def build(arch: ArchSpec, seed: int = 0, *, precision: str = "single") -> Network:
    """Construct and initialize a network for ``arch``."""
    dtype = storage_dtype(precision)
    rng = np.random.default_rng(seed)
    body = _BUILDERS[arch.family](arch, rng, dtype)
    network = Network(arch, body, precision=precision)
    network.eval()
    logger.info(
        "Built %s (width %.3g, clip %s): %d parameters",
        arch.family.value, arch.width_multiplier, arch.shape, param_count(network),
    )
    return network


def param_count(network: Network | Layer) -> int:
    """Number of trainable scalars (running statistics excluded)."""
    tensors = network.named_tensors()
    return sum(t.size for _, t in tensors if t.trainable)


def forward(network: Network, clips: np.ndarray) -> np.ndarray:
    """Logits (N, 2) for a batch of clips in the network's current mode."""
    return network.forward(clips)
