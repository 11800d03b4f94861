"""Stacked LSTM over a (T, N, F) sequence with backpropagation through time.

Gate blocks are stacked in the order (input, forget, candidate, output) along
the first axis of every weight matrix and bias vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from stfl.errors import ConfigurationError, DimensionError, StateError
from stfl.tensor import as_compute, finish, result_dtype

GATE_ORDER = ("input", "forget", "candidate", "output")


@dataclass(frozen=True)
class LstmSpec:
    input_size: int
    hidden_size: int
    num_layers: int = 1

    def __post_init__(self) -> None:
        if min(self.input_size, self.hidden_size, self.num_layers) < 1:
            raise ConfigurationError(f"LSTM sizes must be positive: {self}")

    def layer_input_size(self, layer: int) -> int:
        return self.input_size if layer == 0 else self.hidden_size

    def param_shapes(self, layer: int) -> dict[str, tuple[int, ...]]:
        """Shapes of ``w_ih``, ``w_hh``, ``b_ih``, ``b_hh`` for one layer."""
        four_h = 4 * self.hidden_size
        return {
            "w_ih": (four_h, self.layer_input_size(layer)),
            "w_hh": (four_h, self.hidden_size),
            "b_ih": (four_h,),
            "b_hh": (four_h,),
        }

    @property
    def param_count(self) -> int:
        return sum(
            int(np.prod(shape))
            for layer in range(self.num_layers)
            for shape in self.param_shapes(layer).values()
        )


LstmParams = list[dict[str, np.ndarray]]


@dataclass(frozen=True)
class _LayerCache:
    x: np.ndarray  # (T, N, F)
    h: np.ndarray  # (T+1, N, H), h[0] initial
    c: np.ndarray  # (T+1, N, H), c[0] initial
    gates: np.ndarray  # (T, N, 4H) activated i, f, g, o
    tanh_c: np.ndarray  # (T, N, H)
    w_ih: np.ndarray
    w_hh: np.ndarray


@dataclass(frozen=True)
class LstmContext:
    spec: LstmSpec
    layers: tuple[_LayerCache, ...]
    dtype: np.dtype


def _check_params(spec: LstmSpec, params: LstmParams) -> None:
    if len(params) != spec.num_layers:
        raise DimensionError(f"expected {spec.num_layers} layer parameter sets, got {len(params)}")
    for layer, p in enumerate(params):
        for name, shape in spec.param_shapes(layer).items():
            if name not in p or p[name].shape != shape:
                got = None if name not in p else p[name].shape
                raise DimensionError(f"layer {layer} {name} has shape {got}, expected {shape}")


def lstm_sequence(
    inputs: np.ndarray,
    spec: LstmSpec,
    params: LstmParams,
    initial: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray], LstmContext]:
    """Run the stacked LSTM; returns outputs (T, N, H), final (h, c) each (L, N, H)."""
    if inputs.ndim != 3:
        raise DimensionError(f"lstm_sequence expects (T, N, F) input, got rank {inputs.ndim}")
    if inputs.shape[2] != spec.input_size:
        raise DimensionError(
            f"input has {inputs.shape[2]} features, spec expects {spec.input_size}", axis="F",
        )
    _check_params(spec, params)
    steps, n, _ = inputs.shape
    hid = spec.hidden_size
    state_shape = (spec.num_layers, n, hid)
    if initial is None:
        h0 = np.zeros(state_shape)
        c0 = np.zeros(state_shape)
    else:
        h0, c0 = (as_compute(s) for s in initial)
        if h0.shape != state_shape or c0.shape != state_shape:
            raise DimensionError(f"initial states must have shape {state_shape}")

    x = as_compute(inputs)
    caches = []
    for layer, p in enumerate(params):
        w_ih, w_hh = as_compute(p["w_ih"]), as_compute(p["w_hh"])
        bias = as_compute(p["b_ih"]) + as_compute(p["b_hh"])
        h = np.zeros((steps + 1, n, hid))
        c = np.zeros((steps + 1, n, hid))
        h[0], c[0] = h0[layer], c0[layer]
        gates = np.zeros((steps, n, 4 * hid))
        tanh_c = np.zeros((steps, n, hid))
        x_proj = x @ w_ih.T + bias  # input contribution for every step at once
        for t in range(steps):
            z = x_proj[t] + h[t] @ w_hh.T
            act = np.empty_like(z)
            act[:, :2 * hid] = expit(z[:, :2 * hid])
            act[:, 2 * hid:3 * hid] = np.tanh(z[:, 2 * hid:3 * hid])
            act[:, 3 * hid:] = expit(z[:, 3 * hid:])
            i, f, g, o = np.split(act, 4, axis=1)
            c[t + 1] = f * c[t] + i * g
            tanh_c[t] = np.tanh(c[t + 1])
            h[t + 1] = o * tanh_c[t]
            gates[t] = act
        caches.append(_LayerCache(x, h, c, gates, tanh_c, w_ih, w_hh))
        x = h[1:]

    dtype = result_dtype(inputs, params[0]["w_ih"])
    h_n = np.stack([cache.h[-1] for cache in caches])
    c_n = np.stack([cache.c[-1] for cache in caches])
    ctx = LstmContext(spec, tuple(caches), dtype)
    return (
        finish(x, dtype, "lstm_sequence"),
        (finish(h_n, dtype, "lstm_sequence"), finish(c_n, dtype, "lstm_sequence")),
        ctx,
    )


def lstm_backward(
    grad_outputs: np.ndarray,
    ctx: LstmContext | None,
    grad_final: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, LstmParams]:
    """Backpropagation through time; returns grad_inputs and per-layer param grads."""
    if ctx is None:
        raise StateError("lstm_backward called without a forward context")
    top = ctx.layers[-1]
    if grad_outputs.shape != top.h[1:].shape:
        raise DimensionError(f"grad_outputs shape {grad_outputs.shape} differs from outputs {top.h[1:].shape}")
    hid = ctx.spec.hidden_size
    d_out = as_compute(grad_outputs)
    grads: LstmParams = [{} for _ in ctx.layers]

    for layer in reversed(range(len(ctx.layers))):
        cache = ctx.layers[layer]
        steps = cache.gates.shape[0]
        if grad_final is None:
            dh_next = np.zeros_like(cache.h[0])
            dc_next = np.zeros_like(cache.c[0])
        else:
            dh_next = as_compute(grad_final[0][layer]).copy()
            dc_next = as_compute(grad_final[1][layer]).copy()
        d_w_ih = np.zeros_like(cache.w_ih)
        d_w_hh = np.zeros_like(cache.w_hh)
        d_b = np.zeros(4 * hid)
        d_x = np.zeros_like(cache.x)

        for t in reversed(range(steps)):
            i, f, g, o = np.split(cache.gates[t], 4, axis=1)
            dh = d_out[t] + dh_next
            d_o = dh * cache.tanh_c[t]
            dc = dh * o * (1.0 - cache.tanh_c[t] ** 2) + dc_next
            d_i = dc * g
            d_g = dc * i
            d_f = dc * cache.c[t]
            dc_next = dc * f
            d_z = np.concatenate(
                [d_i * i * (1.0 - i), d_f * f * (1.0 - f), d_g * (1.0 - g ** 2), d_o * o * (1.0 - o)],
                axis=1,
            )
            d_w_ih += d_z.T @ cache.x[t]
            d_w_hh += d_z.T @ cache.h[t]
            d_b += d_z.sum(axis=0)
            d_x[t] = d_z @ cache.w_ih
            dh_next = d_z @ cache.w_hh

        grads[layer] = {
            "w_ih": finish(d_w_ih, ctx.dtype, "lstm_backward"),
            "w_hh": finish(d_w_hh, ctx.dtype, "lstm_backward"),
            "b_ih": finish(d_b, ctx.dtype, "lstm_backward"),
            "b_hh": finish(d_b.copy(), ctx.dtype, "lstm_backward"),
        }
        d_out = d_x

    return finish(d_out, ctx.dtype, "lstm_backward"), grads
