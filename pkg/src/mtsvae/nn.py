"""Small dense-network kernel: MLP forward/backward, Adam, gradient oracle.

Parameters of an :class:`Mlp` are exposed as a flat list
``[W0, b0, W1, b1, ...]``; gradients and optimizer moments use the same
layout. Inputs may be a single vector or a batch with one sample per row;
batched backward passes return gradients summed over rows.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

TANH = "tanh"
LINEAR = "linear"
ACTIVATIONS = (TANH, LINEAR)


class NumericalError(ArithmeticError):
    """Raised when a loss or gradient stops being finite."""


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = LINEAR

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"bad layer shapes W{self.weights.shape} b{self.bias.shape}")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass
class Mlp:
    layers: list[Layer]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(f"layer dims do not chain: {a.n_out} -> {b.n_in}")

    @classmethod
    def build(cls, sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator) -> "Mlp":
        """Xavier-uniform weights, zero biases."""
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
            limit = np.sqrt(6.0 / (n_in + n_out))
            layers.append(Layer(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out), act))
        return cls(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.bias]
        return out

    def with_parameters(self, params: Sequence[np.ndarray]) -> "Mlp":
        if len(params) != 2 * len(self.layers):
            raise ValueError("parameter list does not match network")
        return Mlp([Layer(params[2 * i], params[2 * i + 1], layer.activation)
                    for i, layer in enumerate(self.layers)])

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


@dataclass
class Cache:
    inputs: list[np.ndarray]
    outputs: list[np.ndarray]


def mlp_forward(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, Cache]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.n_in:
        raise ValueError(f"input dim {x.shape[-1]} != network input dim {net.n_in}")
    inputs, outputs = [], []
    h = x
    for layer in net.layers:
        inputs.append(h)
        a = h @ layer.weights.T + layer.bias
        h = np.tanh(a) if layer.activation == TANH else a
        outputs.append(h)
    return h, Cache(inputs, outputs)


def mlp_backward(net: Mlp, cache: Cache, grad_output: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Reverse pass; returns ``(gradients, grad_input)``."""
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != cache.outputs[-1].shape:
        raise ValueError(f"grad_output shape {g.shape} != output shape {cache.outputs[-1].shape}")
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if layer.activation == TANH:
            g = g * (1.0 - cache.outputs[i] ** 2)
        x = cache.inputs[i]
        if g.ndim == 1:
            grads[2 * i] = np.outer(g, x)
            grads[2 * i + 1] = g.copy()
        else:
            grads[2 * i] = g.T @ x
            grads[2 * i + 1] = g.sum(axis=0)
        g = g @ layer.weights
    return grads, g


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray], lr: float = 1e-4) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0, lr)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              weight_decay: float = 0.0) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update with decoupled weight decay.

    Returns fresh parameter and state objects; the inputs are not modified.
    """
    if state.lr <= 0:
        raise ValueError("learning rate must be positive")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and state do not match")
    t = state.t + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        q = p - state.lr * weight_decay * p if weight_decay else p
        q = q - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_p.append(q)
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t, state.lr, state.beta1, state.beta2, state.eps)


def finite_diff_grad(loss_fn: Callable[[list[np.ndarray]], float], params: Sequence[np.ndarray],
                     h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient of ``loss_fn`` at ``params``."""
    if h <= 0:
        raise ValueError("step must be positive")
    work = [np.array(p, dtype=np.float64, copy=True) for p in params]
    grads = []
    for p in work:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = loss_fn(work)
            flat[k] = orig - h
            down = loss_fn(work)
            flat[k] = orig
            gflat[k] = (up - down) / (2 * h)
        grads.append(g)
    return grads
