"""Plain-numpy feed-forward network and Adam optimizer.

The network is a stack of affine maps with an elementwise activation on
every layer except the last.  Parameters live in flat lists of numpy
arrays so the optimizer can treat them uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = ["MlpNetwork", "AdamState", "adam_step"]

_ACTIVATIONS = ("relu",)


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    # subgradient at exactly 0 is defined as 0
    return (z > 0.0).astype(z.dtype)


@dataclass
class MlpNetwork:
    """Weights and biases of an MLP with scalar output.

    ``layer_sizes`` is [d_in, h_1, ..., h_l, 1]; the activation is
    applied after every affine map except the final one.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        sizes = self.layer_sizes
        if len(sizes) < 2 or sizes[-1] != 1:
            raise ValueError("layer sizes must end in a scalar output")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("weight/bias count does not match layer sizes")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise ValueError(f"layer {k} has shape {w.shape}, expected {(sizes[k], sizes[k + 1])}")

    @classmethod
    def initialize(
        cls,
        layer_sizes: Sequence[int],
        rng: np.random.Generator,
        activation: str = "relu",
    ) -> "MlpNetwork":
        """He-style uniform fan-in initialization, biases at zero."""
        sizes = list(layer_sizes)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(sizes, weights, biases, activation)

    @property
    def d_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_hidden_layers(self) -> int:
        return len(self.layer_sizes) - 2

    def parameters(self) -> list[np.ndarray]:
        return list(self.weights) + list(self.biases)

    def set_parameters(self, params: list[np.ndarray]) -> None:
        n = len(self.weights)
        self.weights = [np.asarray(p) for p in params[:n]]
        self.biases = [np.asarray(p) for p in params[n:]]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Scalar outputs for a (rows, d_in) input matrix (or one vector)."""
        out, _ = self.forward_cached(np.atleast_2d(np.asarray(x, dtype=float)))
        return out if np.asarray(x).ndim == 2 else float(out[0])

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass keeping per-layer inputs and pre-activations for backprop."""
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ValueError(f"input has shape {x.shape}, expected (rows, {self.d_in})")
        cache = []
        a = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            cache.append((a, z))
            a = z if k == last else _relu(z)
        return a[:, 0], cache

    def backward(self, cache, grad_out: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients given d(loss)/d(output) per row.

        Returns gradients aligned with ``parameters()``.
        """
        gw = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        delta = grad_out[:, None]
        for k in range(len(self.weights) - 1, -1, -1):
            a, z = cache[k]
            if k < len(self.weights) - 1:
                delta = delta * _relu_grad(z)
            gw[k] = a.T @ delta
            gb[k] = delta.sum(axis=0)
            if k > 0:
                delta = delta @ self.weights[k].T
        return gw + gb

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())


@dataclass
class AdamState:
    """First/second moment accumulators plus hyperparameters."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    learning_rate: float = 0.005

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], learning_rate: float = 0.005,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(np.asarray(p, dtype=float)) for p in params],
            v=[np.zeros_like(np.asarray(p, dtype=float)) for p in params],
            beta1=beta1, beta2=beta2, eps=eps, learning_rate=learning_rate,
        )


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """One bias-corrected Adam update; mutates state, returns new params."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter/gradient shapes do not match optimizer state")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / (1.0 - b1 ** t)
        v_hat = state.v[i] / (1.0 - b2 ** t)
        out.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps))
    return out
