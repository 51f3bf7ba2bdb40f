"""Small fully connected networks with hand-written backprop (float64 numpy)."""
from __future__ import annotations

import numpy as np

from .errors import ShapeError

LEAKY_SLOPE = 0.01


def orthogonal(shape: tuple[int, int], gain: float, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal(shape)
    u, _, vt = np.linalg.svd(a, full_matrices=False)
    q = u if u.shape == shape else vt
    return gain * q


class Mlp:
    """Dense layers with leaky-ReLU between them and a linear output layer.

    ``params`` alternates weight and bias: [W0, b0, W1, b1, ...] with
    W of shape (fan_in, fan_out).
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None, out_gain: float = 1.0,
                 hidden_gain: float = np.sqrt(2.0)):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ShapeError("need at least input and output sizes")
        self.params: list[np.ndarray] = []
        n_layers = len(self.sizes) - 1
        for i in range(n_layers):
            shape = (self.sizes[i], self.sizes[i + 1])
            if rng is None:
                w = np.zeros(shape)
            else:
                w = orthogonal(shape, out_gain if i == n_layers - 1 else hidden_gain, rng)
            self.params += [w, np.zeros(shape[1])]

    @classmethod
    def zeros(cls, sizes) -> "Mlp":
        return cls(sizes, rng=None)

    def copy(self) -> "Mlp":
        other = Mlp.zeros(self.sizes)
        other.params = [p.copy() for p in self.params]
        return other

    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ShapeError(f"expected input (batch, {self.sizes[0]}), got {x.shape}")
        cache = [x]
        h = x
        n_layers = len(self.sizes) - 1
        for i in range(n_layers):
            z = h @ self.params[2 * i] + self.params[2 * i + 1]
            if i < n_layers - 1:
                cache.append(z)
                h = np.where(z > 0, z, LEAKY_SLOPE * z)
                cache.append(h)
            else:
                h = z
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def forward_one(self, x: np.ndarray) -> np.ndarray:
        """Single-sample forward without a cache (rollout hot path)."""
        h = x
        last = len(self.params) - 2
        for i in range(0, len(self.params), 2):
            h = h @ self.params[i] + self.params[i + 1]
            if i < last:
                h = np.maximum(h, LEAKY_SLOPE * h)
        return h

    def backward(self, cache, dout: np.ndarray) -> list[np.ndarray]:
        """Gradients of sum(dout * output) for every entry of ``params``."""
        n_layers = len(self.sizes) - 1
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        g = dout
        for i in reversed(range(n_layers)):
            h_in = cache[0] if i == 0 else cache[2 * i]
            grads[2 * i] = h_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = g @ self.params[2 * i].T
                z = cache[2 * i - 1]
                g = g * np.where(z > 0, 1.0, LEAKY_SLOPE)
        return grads

    def n_params(self) -> int:
        return sum(p.size for p in self.params)


class Adam:
    """Adaptive-moment optimizer over a list of arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> float:
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads:
            g *= scale
    return norm
