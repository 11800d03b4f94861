"""Gradient-check suite over every differentiable op and composite block."""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np

from stfl.constants import Family, GRADCHECK_STEP, GRADCHECK_TOL
from stfl.models.layers import Layer
from stfl.models.resnet import BasicBlock, Conv2Plus1d
from stfl.ops import (
    Conv3DSpec,
    GradcheckReport,
    LstmSpec,
    batchnorm,
    batchnorm_backward,
    conv3d,
    conv3d_backward,
    gradcheck,
    linear,
    linear_backward,
    lstm_backward,
    lstm_sequence,
    pool3d,
    pool3d_backward,
    projection,
    relu,
    relu_backward,
    weighted_softmax_cross_entropy,
)
from stfl.ops.gradcheck import LossFn

logger = logging.getLogger(__name__)

Case = tuple[LossFn, dict[str, np.ndarray]]
DOUBLE = np.dtype(np.float64)


def _conv3d(rng: np.random.Generator) -> Case:
    spec = Conv3DSpec(2, 3, (3, 3, 3), (1, 2, 2), (1, 1, 1), has_bias=True)
    inputs = {
        "x": rng.standard_normal((1, 2, 4, 5, 5)),
        "w": rng.standard_normal(spec.weight_shape),
        "b": rng.standard_normal(3),
    }
    proj = projection(conv3d(inputs["x"], spec, inputs["w"], inputs["b"])[0].shape, 1)

    def fn(p: dict[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
        out, ctx = conv3d(p["x"], spec, p["w"], p["b"])
        gx, gw, gb = conv3d_backward(proj, ctx)
        return float(np.sum(out * proj)), {"x": gx, "w": gw, "b": gb}  # type: ignore[dict-item]

    return fn, inputs


def _batchnorm(rng: np.random.Generator) -> Case:
    inputs = {
        "x": rng.standard_normal((2, 3, 2, 4, 4)),
        "gamma": rng.uniform(0.5, 1.5, 3),
        "beta": rng.standard_normal(3),
    }
    proj = projection(inputs["x"].shape, 2)
    stats = {"running_mean": np.zeros(3), "running_var": np.ones(3)}

    def fn(p: dict[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
        out, ctx, _ = batchnorm(p["x"], p["gamma"], p["beta"], training=True, **stats)
        gx, gg, gb = batchnorm_backward(proj, ctx)
        return float(np.sum(out * proj)), {"x": gx, "gamma": gg, "beta": gb}

    return fn, inputs


def _linear_relu(rng: np.random.Generator) -> Case:
    inputs = {"x": rng.standard_normal((4, 5)), "w": rng.standard_normal((3, 5)), "b": rng.standard_normal(3)}
    proj = projection((4, 3), 3)

    def fn(p: dict[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
        z, lctx = linear(p["x"], p["w"], p["b"])
        out, rctx = relu(z)
        gx, gw, gb = linear_backward(relu_backward(proj, rctx), lctx)
        return float(np.sum(out * proj)), {"x": gx, "w": gw, "b": gb}  # type: ignore[dict-item]

    return fn, inputs


def _pool(kind: str) -> Callable[[np.random.Generator], Case]:
    def case(rng: np.random.Generator) -> Case:
        inputs = {"x": rng.standard_normal((1, 2, 4, 4, 4))}
        proj = projection((1, 2, 2, 2, 2), 4)

        def fn(p: dict[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
            out, ctx = pool3d(p["x"], kind, (2, 2, 2))
            return float(np.sum(out * proj)), {"x": pool3d_backward(proj, ctx)}

        return fn, inputs

    return case


def _lstm(rng: np.random.Generator) -> Case:
    spec = LstmSpec(5, 4, 2)
    inputs = {"inputs": rng.standard_normal((3, 2, 5))}
    for layer in range(spec.num_layers):
        for key, shape in spec.param_shapes(layer).items():
            inputs[f"{key}_l{layer}"] = rng.uniform(-0.5, 0.5, shape)
    proj = projection((3, 2, 4), 5)

    def fn(p: dict[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
        params = [
            {key: p[f"{key}_l{layer}"] for key in spec.param_shapes(layer)}
            for layer in range(spec.num_layers)
        ]
        out, _, ctx = lstm_sequence(p["inputs"], spec, params)
        gx, grads = lstm_backward(proj, ctx)
        named = {f"{key}_l{layer}": g for layer, gl in enumerate(grads) for key, g in gl.items()}
        return float(np.sum(out * proj)), {"inputs": gx, **named}

    return fn, inputs


def _cross_entropy(rng: np.random.Generator) -> Case:
    labels = np.array([0, 1, 1, 0])
    weights = np.array([5.28, 0.55])

    def fn(p: dict[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
        loss, grad = weighted_softmax_cross_entropy(p["logits"], labels, weights)
        return loss, {"logits": grad}

    return fn, {"logits": rng.standard_normal((4, 2))}


def _layer_case(layer: Layer, x: np.ndarray) -> Case:
    """Check a layer in training mode w.r.t. its input and every trainable tensor."""
    layer.train()
    tensors = {name: t for name, t in layer.named_tensors() if t.trainable}
    proj = projection(layer.forward(x).shape, 6)
    inputs = {"input": x, **{name: t.data.copy() for name, t in tensors.items()}}

    def fn(p: dict[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
        for name, t in tensors.items():
            t.data = p[name]
            t.zero_grad()
        out = layer.forward(p["input"])
        grad_input = layer.backward(proj)
        grads = {name: t.grad if t.grad is not None else np.zeros_like(t.data) for name, t in tensors.items()}
        return float(np.sum(out * proj)), {"input": grad_input, **grads}

    return fn, inputs


def _conv2plus1d(rng: np.random.Generator) -> Case:
    layer = Conv2Plus1d(2, 3, 4, rng, stride=(2, 1, 1), dtype=DOUBLE)
    return _layer_case(layer, rng.standard_normal((2, 2, 4, 5, 5)))


def _residual(rng: np.random.Generator) -> Case:
    block = BasicBlock(Family.R3D, 2, 3, rng, stride=2, dtype=DOUBLE)
    return _layer_case(block, rng.standard_normal((2, 2, 4, 6, 6)))


CASES: dict[str, Callable[[np.random.Generator], Case]] = {
    "conv3d": _conv3d,
    "batchnorm": _batchnorm,
    "linear_relu": _linear_relu,
    "avg_pool": _pool("avg"),
    "max_pool": _pool("max"),
    "lstm": _lstm,
    "cross_entropy": _cross_entropy,
    "conv2plus1d_block": _conv2plus1d,
    "residual_block": _residual,
}


def gradcheck_suite(
    names: list[str] | None = None,
    *,
    tol: float = GRADCHECK_TOL,
    step: float = GRADCHECK_STEP,
    seed: int = 0,
) -> list[GradcheckReport]:
    """Run the named cases (all by default) in double precision, serially."""
    selected = names or list(CASES)
    unknown = [n for n in selected if n not in CASES]
    if unknown:
        raise KeyError(f"unknown gradcheck case(s): {', '.join(unknown)}")
    reports = []
    order = list(CASES)
    for name in selected:
        rng = np.random.default_rng([seed, order.index(name)])
        fn, inputs = CASES[name](rng)
        report = gradcheck(fn, inputs, op=name, tol=tol, step=step, seed=seed)
        (logger.info if report.passed else logger.error)("%s", report.summary())
        reports.append(report)
    return reports
