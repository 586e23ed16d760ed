"""Small fully connected networks with hand-written backprop, plus Adam."""

from __future__ import annotations

import numpy as np


class MLP:
    """ReLU trunk with a linear head; ``out="tanh_half"`` applies 2 sigmoid(z) - 1 = tanh(z / 2).

    Parameters are stored as a flat list ``[W0, b0, W1, b1, ...]`` with
    ``W_k`` of shape (in, out).
    """

    def __init__(self, sizes, out: str = "linear", rng: np.random.Generator | None = None,
                 zero_last: bool = True):
        if out not in ("linear", "tanh_half"):
            raise ValueError(f"unknown output {out!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.out = out
        rng = rng or np.random.default_rng(0)
        self.params = []
        n = len(self.sizes) - 1
        for k in range(n):
            fan_in, fan_out = self.sizes[k], self.sizes[k + 1]
            if k == n - 1 and zero_last:
                W = np.zeros((fan_in, fan_out))
            else:
                W = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
            self.params += [W, np.zeros(fan_out)]

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x, cache: bool = False):
        h = np.atleast_2d(np.asarray(x, dtype=float))
        acts = [h]
        for k in range(self.n_layers):
            z = h @ self.params[2 * k] + self.params[2 * k + 1]
            if k < self.n_layers - 1:
                h = np.maximum(z, 0.0)
            else:
                h = np.tanh(0.5 * z) if self.out == "tanh_half" else z
            acts.append(h)
        return (h, acts) if cache else h

    def backward(self, acts, grad_out):
        """Gradients of sum(grad_out * output) with respect to every parameter."""
        g = np.asarray(grad_out, dtype=float)
        if self.out == "tanh_half":
            y = acts[-1]
            g = g * 0.5 * (1.0 - y * y)
        grads = [None] * len(self.params)
        for k in range(self.n_layers - 1, -1, -1):
            h_in = acts[k]
            grads[2 * k] = h_in.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0:
                g = (g @ self.params[2 * k].T) * (acts[k] > 0.0)
        return grads

    def copy(self) -> "MLP":
        other = MLP.__new__(MLP)
        other.sizes = self.sizes
        other.out = self.out
        other.params = [p.copy() for p in self.params]
        return other

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, v):
        i = 0
        for p in self.params:
            p[...] = np.reshape(v[i:i + p.size], p.shape)
            i += p.size


class Adam:
    def __init__(self, params, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads, max_norm: float | None = 0.5):
        if max_norm is not None:
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads))
            if norm > max_norm:
                grads = [g * (max_norm / norm) for g in grads]
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
