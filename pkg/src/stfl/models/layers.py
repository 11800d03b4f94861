"""Stateful layers composed from :mod:`stfl.ops`.

A layer owns named :class:`~stfl.tensor.Tensor` parameters and named child
layers. ``forward`` keeps the op context only in training mode, so eval-mode
forward never mutates a layer and is safe for concurrent readers.
``backward`` accumulates parameter gradients and returns the input gradient.
"""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np

from stfl.errors import DimensionError, StateError
from stfl.ops import (
    Conv3DSpec,
    LstmSpec,
    batchnorm,
    batchnorm_backward,
    conv3d,
    conv3d_backward,
    linear,
    linear_backward,
    lstm_backward,
    lstm_sequence,
    pool3d,
    pool3d_backward,
    relu,
    relu_backward,
)
from stfl.ops.conv import Triple
from stfl.tensor import Tensor, as_compute, finish


def kaiming_normal(
    rng: np.random.Generator, shape: tuple[int, ...], fan_out: int, dtype: np.dtype,
) -> np.ndarray:
    """Normal draw with std sqrt(2 / fan_out); always drawn in double for determinism."""
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_out)).astype(dtype)


class Layer:
    """Base class: parameter registry, child registry and mode flag."""

    def __init__(self) -> None:
        self.training = False
        self._tensors: dict[str, Tensor] = {}
        self._children: dict[str, Layer] = {}
        self._ctx: object | None = None

    def register(self, name: str, tensor: Tensor) -> Tensor:
        self._tensors[name] = tensor
        return tensor

    def add(self, name: str, layer: Layer) -> Layer:
        if name in self._children:
            raise ValueError(f"duplicate child layer '{name}'")
        self._children[name] = layer
        return layer

    def children(self) -> Iterator[tuple[str, Layer]]:
        yield from self._children.items()

    def named_tensors(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        """Own tensors first, then children depth-first, with dotted names."""
        for name, tensor in self._tensors.items():
            yield prefix + name, tensor
        for name, child in self._children.items():
            yield from child.named_tensors(f"{prefix}{name}.")

    def train(self, mode: bool = True) -> None:
        self.training = mode
        self._ctx = None
        for _, child in self.children():
            child.train(mode)

    def _keep(self, ctx: object) -> None:
        self._ctx = ctx if self.training else None

    def _context(self) -> object:
        if self._ctx is None:
            raise StateError(f"{type(self).__name__}.backward called without a training-mode forward")
        return self._ctx

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Leaf layers
# ---------------------------------------------------------------------------


class Conv3d(Layer):
    def __init__(
        self,
        spec: Conv3DSpec,
        rng: np.random.Generator,
        *,
        dtype: np.dtype = np.dtype(np.float32),
        weight: np.ndarray | None = None,
    ) -> None:
        super().__init__()
        self.spec = spec
        if weight is None:
            fan_out = spec.out_channels * int(np.prod(spec.kernel))
            weight = kaiming_normal(rng, spec.weight_shape, fan_out, dtype)
        elif weight.shape != spec.weight_shape:
            raise DimensionError(f"weight shape {weight.shape} does not match {spec.weight_shape}")
        self.weight = self.register("weight", Tensor(np.asarray(weight, dtype=dtype)))
        self.bias = (
            self.register("bias", Tensor(np.zeros(spec.out_channels, dtype=dtype)))
            if spec.has_bias else None
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, ctx = conv3d(x, self.spec, self.weight.data, None if self.bias is None else self.bias.data)
        self._keep(ctx)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        grad_x, grad_w, grad_b = conv3d_backward(grad, self._context())  # type: ignore[arg-type]
        self.weight.accumulate_grad(grad_w)
        if self.bias is not None and grad_b is not None:
            self.bias.accumulate_grad(grad_b)
        return grad_x


class BatchNorm3d(Layer):
    def __init__(self, channels: int, *, dtype: np.dtype = np.dtype(np.float32)) -> None:
        super().__init__()
        self.weight = self.register("weight", Tensor(np.ones(channels, dtype=dtype)))
        self.bias = self.register("bias", Tensor(np.zeros(channels, dtype=dtype)))
        self.running_mean = self.register(
            "running_mean", Tensor(np.zeros(channels, dtype=dtype), trainable=False))
        self.running_var = self.register(
            "running_var", Tensor(np.ones(channels, dtype=dtype), trainable=False))

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, ctx, stats = batchnorm(
            x, self.weight.data, self.bias.data,
            training=self.training,
            running_mean=self.running_mean.data,
            running_var=self.running_var.data,
        )
        if self.training:
            self.running_mean.data = stats.mean
            self.running_var.data = stats.var
        self._keep(ctx)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        grad_x, grad_gamma, grad_beta = batchnorm_backward(grad, self._context())  # type: ignore[arg-type]
        self.weight.accumulate_grad(grad_gamma)
        self.bias.accumulate_grad(grad_beta)
        return grad_x


class ReLU(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        out, ctx = relu(x)
        self._keep(ctx)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return relu_backward(grad, self._context())  # type: ignore[arg-type]


class Pool3d(Layer):
    def __init__(
        self,
        kind: str,
        window: Triple = (1, 1, 1),
        stride: Triple | None = None,
        padding: Triple = (0, 0, 0),
    ) -> None:
        super().__init__()
        self.kind = kind
        self.window = window
        self.stride = stride
        self.padding = padding

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, ctx = pool3d(x, self.kind, self.window, self.stride, self.padding)
        self._keep(ctx)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return pool3d_backward(grad, self._context())  # type: ignore[arg-type]


class Flatten(Layer):
    """(N, C, 1, 1, 1) -> (N, C)."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 5 or x.shape[2:] != (1, 1, 1):
            raise DimensionError(f"Flatten expects (N, C, 1, 1, 1), got {x.shape}")
        self._keep(x.shape)
        return x.reshape(x.shape[0], x.shape[1])

    def backward(self, grad: np.ndarray) -> np.ndarray:
        shape = self._context()
        return grad.reshape(shape)  # type: ignore[arg-type]


class Linear(Layer):
    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        *,
        dtype: np.dtype = np.dtype(np.float32),
    ) -> None:
        super().__init__()
        self.weight = self.register(
            "weight", Tensor(kaiming_normal(rng, (out_features, in_features), out_features, dtype)))
        self.bias = self.register("bias", Tensor(np.zeros(out_features, dtype=dtype)))

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, ctx = linear(x, self.weight.data, self.bias.data)
        self._keep(ctx)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        grad_x, grad_w, grad_b = linear_backward(grad, self._context())  # type: ignore[arg-type]
        self.weight.accumulate_grad(grad_w)
        if grad_b is not None:
            self.bias.accumulate_grad(grad_b)
        return grad_x


class FrameSequence(Layer):
    """Spatial mean of per-frame features: (N, C, T, H, W) -> (T, N, C)."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 5:
            raise DimensionError(f"FrameSequence expects (N, C, T, H, W), got rank {x.ndim}")
        self._keep(x.shape)
        pooled = as_compute(x).mean(axis=(3, 4))
        return finish(pooled.transpose(2, 0, 1), x.dtype, "frame_sequence")

    def backward(self, grad: np.ndarray) -> np.ndarray:
        n, c, t, h, w = self._context()  # type: ignore[misc]
        g = as_compute(grad).transpose(1, 2, 0)[:, :, :, None, None] / float(h * w)
        return finish(np.broadcast_to(g, (n, c, t, h, w)).copy(), grad.dtype, "frame_sequence")


class Lstm(Layer):
    """Stacked LSTM over (T, N, F) returning the top layer's last hidden state (N, H)."""

    def __init__(
        self,
        spec: LstmSpec,
        rng: np.random.Generator,
        *,
        dtype: np.dtype = np.dtype(np.float32),
    ) -> None:
        super().__init__()
        self.spec = spec
        bound = 1.0 / np.sqrt(spec.hidden_size)
        self.layers: list[dict[str, Tensor]] = []
        for layer in range(spec.num_layers):
            tensors = {}
            for key, shape in spec.param_shapes(layer).items():
                value = rng.uniform(-bound, bound, size=shape).astype(dtype)
                tensors[key] = self.register(f"{key}_l{layer}", Tensor(value))
            self.layers.append(tensors)

    def _params(self) -> list[dict[str, np.ndarray]]:
        return [{key: t.data for key, t in tensors.items()} for tensors in self.layers]

    def forward(self, x: np.ndarray) -> np.ndarray:
        outputs, _, ctx = lstm_sequence(x, self.spec, self._params())
        self._keep((ctx, outputs.shape))
        return outputs[-1]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        ctx, out_shape = self._context()  # type: ignore[misc]
        grad_outputs = np.zeros(out_shape, dtype=grad.dtype)
        grad_outputs[-1] = grad
        grad_x, grads = lstm_backward(grad_outputs, ctx)
        for tensors, layer_grads in zip(self.layers, grads):
            for key, tensor in tensors.items():
                tensor.accumulate_grad(layer_grads[key])
        return grad_x


# ---------------------------------------------------------------------------
# Containers
# ---------------------------------------------------------------------------


class Sequential(Layer):
    def __init__(self, *layers: tuple[str, Layer]) -> None:
        super().__init__()
        for name, layer in layers:
            self.add(name, layer)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for _, layer in self.children():
            x = layer.forward(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for _, layer in reversed(list(self.children())):
            grad = layer.backward(grad)
        return grad


class Branches(Layer):
    """Parallel branches on one input, concatenated along channels."""

    def __init__(self, *branches: tuple[str, Layer]) -> None:
        super().__init__()
        for name, layer in branches:
            self.add(name, layer)

    def forward(self, x: np.ndarray) -> np.ndarray:
        outs = [layer.forward(x) for _, layer in self.children()]
        self._keep([o.shape[1] for o in outs])
        return np.concatenate(outs, axis=1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        widths = self._context()
        splits = np.cumsum(widths)[:-1]  # type: ignore[arg-type]
        total = None
        for (_, layer), g in zip(self.children(), np.split(grad, splits, axis=1)):
            gx = layer.backward(np.ascontiguousarray(g))
            total = gx if total is None else total + gx
        assert total is not None
        return total


def conv_bn_relu(
    spec: Conv3DSpec, rng: np.random.Generator, dtype: np.dtype, weight: np.ndarray | None = None,
) -> Sequential:
    return Sequential(
        ("conv", Conv3d(spec, rng, dtype=dtype, weight=weight)),
        ("bn", BatchNorm3d(spec.out_channels, dtype=dtype)),
        ("relu", ReLU()),
    )
