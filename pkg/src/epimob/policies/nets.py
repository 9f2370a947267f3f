"""Small dense networks with hand-written backprop.

Hidden layers use tanh so finite-difference checks hold everywhere; the
actor squashes its output to [0, 1] with a sigmoid, the critic head is
linear. Output layers start at zero, which pins an untrained actor to
the 0.5 midpoint quota.
"""

from __future__ import annotations

import numpy as np

__all__ = ["MLP", "Adam", "soft_update", "flatten_params", "set_flat_params"]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class MLP:
    """Fully connected net; ``head`` is 'sigmoid' or 'linear'."""

    def __init__(self, sizes: list[int], head: str, rng: np.random.Generator):
        if head not in ("sigmoid", "linear"):
            raise ValueError(f"head must be 'sigmoid' or 'linear', got {head!r}")
        self.sizes = list(sizes)
        self.head = head
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        last = len(sizes) - 2
        for layer, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if layer == last:
                w = np.zeros((n_in, n_out))
            else:
                limit = np.sqrt(6.0 / (n_in + n_out))
                w = rng.uniform(-limit, limit, size=(n_in, n_out))
            self.weights.append(w)
            self.biases.append(np.zeros(n_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (output (B, out), cache of per-layer activations)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        cache = [x]
        h = x
        for layer in range(self.n_layers):
            z = h @ self.weights[layer] + self.biases[layer]
            if layer < self.n_layers - 1:
                h = np.tanh(z)
            elif self.head == "sigmoid":
                h = _sigmoid(z)
            else:
                h = z
            cache.append(h)
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: list[np.ndarray], grad_out: np.ndarray
                 ) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
        """Backprop an upstream gradient through the cached forward pass.

        Returns (weight grads, bias grads, gradient w.r.t. the input),
        all summed over the batch.
        """
        grad = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
        w_grads: list[np.ndarray] = [np.empty(0)] * self.n_layers
        b_grads: list[np.ndarray] = [np.empty(0)] * self.n_layers
        for layer in range(self.n_layers - 1, -1, -1):
            out = cache[layer + 1]
            if layer < self.n_layers - 1:
                grad = grad * (1.0 - out * out)          # d tanh
            elif self.head == "sigmoid":
                grad = grad * out * (1.0 - out)          # d sigmoid
            w_grads[layer] = cache[layer].T @ grad
            b_grads[layer] = grad.sum(axis=0)
            grad = grad @ self.weights[layer].T
        return w_grads, b_grads, grad

    def copy(self) -> "MLP":
        clone = MLP.__new__(MLP)
        clone.sizes = list(self.sizes)
        clone.head = self.head
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone


def flatten_params(net: MLP) -> np.ndarray:
    parts = []
    for w, b in zip(net.weights, net.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def set_flat_params(net: MLP, flat: np.ndarray) -> None:
    offset = 0
    for layer in range(net.n_layers):
        w = net.weights[layer]
        net.weights[layer] = flat[offset:offset + w.size].reshape(w.shape).copy()
        offset += w.size
        b = net.biases[layer]
        net.biases[layer] = flat[offset:offset + b.size].copy()
        offset += b.size
    if offset != len(flat):
        raise ValueError(f"parameter vector length {len(flat)} != {offset}")


class Adam:
    """Adam over an MLP's weight/bias lists."""

    def __init__(self, net: MLP, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(w) for w in net.weights] + \
                  [np.zeros_like(b) for b in net.biases]
        self._v = [np.zeros_like(w) for w in net.weights] + \
                  [np.zeros_like(b) for b in net.biases]

    def step(self, w_grads: list[np.ndarray], b_grads: list[np.ndarray]) -> None:
        self.t += 1
        grads = list(w_grads) + list(b_grads)
        params = self.net.weights + self.net.biases
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for slot, (p, g) in enumerate(zip(params, grads)):
            m = self._m[slot] = self.beta1 * self._m[slot] + (1 - self.beta1) * g
            v = self._v[slot] = self.beta2 * self._v[slot] + (1 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def soft_update(target: MLP, online: MLP, tau: float) -> None:
    """target <- (1 - tau) * target + tau * online, in place."""
    for layer in range(target.n_layers):
        target.weights[layer] *= 1.0 - tau
        target.weights[layer] += tau * online.weights[layer]
        target.biases[layer] *= 1.0 - tau
        target.biases[layer] += tau * online.biases[layer]
