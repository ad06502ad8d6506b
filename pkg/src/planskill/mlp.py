"""Small fully-connected networks trained by behavior cloning.

Plain numpy: tanh hidden layers, linear output, mean-squared-error
loss, adaptive-moment gradient descent. Training is seed-deterministic
and gradients are exact (verified against finite differences in the
test suite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData

# Near-constant input dimensions would otherwise map small test-time
# deviations to enormous z-scores and saturate the hidden layers.
STD_FLOOR = 1e-2


@dataclass
class TrainConfig:
    hidden: tuple = (64, 64)
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0


@dataclass
class Normalization:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, data):
        mean = data.mean(axis=0)
        std = np.maximum(data.std(axis=0), STD_FLOOR)
        return cls(mean, std)

    def apply(self, x):
        return (x - self.mean) / self.std

    def invert(self, x):
        return x * self.std + self.mean


def init_params(layer_sizes, rng):
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return weights, biases


def forward(weights, biases, x):
    """Returns (output, activations per layer input)."""
    acts = [x]
    h = x
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        h = z if i == len(weights) - 1 else np.tanh(z)
        acts.append(h)
    return h, acts


def mse_loss_and_grads(weights, biases, x, y):
    """MSE over batch and output dims, with exact parameter gradients."""
    out, acts = forward(weights, biases, x)
    n = x.shape[0] * y.shape[1]
    loss = float(np.sum((out - y) ** 2) / n)
    delta = 2.0 * (out - y) / n
    grads_w, grads_b = [], []
    for i in reversed(range(len(weights))):
        grads_w.append(acts[i].T @ delta)
        grads_b.append(delta.sum(axis=0))
        if i > 0:
            delta = (delta @ weights[i].T) * (1.0 - acts[i] ** 2)
    return loss, grads_w[::-1], grads_b[::-1]


class AdamState:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def update(self, params, grads):
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            mhat = self.m[i] / (1 - self.beta1 ** self.t)
            vhat = self.v[i] / (1 - self.beta2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class Controller:
    layer_sizes: list
    weights: list
    biases: list
    x_norm: Normalization
    y_norm: Normalization

    def predict(self, x):
        """Denormalized outputs for raw inputs."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out, _ = forward(self.weights, self.biases, self.x_norm.apply(x))
        return self.y_norm.invert(out)


def train_controller_arrays(x, y, cfg=None):
    """Behavior cloning on raw (input, target) arrays.

    Returns (controller, history) where history holds per-epoch losses.
    """
    cfg = cfg or TrainConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 10:
        raise InsufficientData(f"need >= 10 samples, got {len(x)}")
    x_norm = Normalization.fit(x)
    y_norm = Normalization.fit(y)
    xn, yn = x_norm.apply(x), y_norm.apply(y)

    layer_sizes = [x.shape[1], *cfg.hidden, y.shape[1]]
    rng = np.random.default_rng(cfg.seed)
    weights, biases = init_params(layer_sizes, rng)
    params = weights + biases
    opt = AdamState(params, lr=cfg.learning_rate)

    n = len(xn)
    losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, gw, gb = mse_loss_and_grads(weights, biases, xn[idx], yn[idx])
            opt.update(params, gw + gb)
            epoch_loss += loss * len(idx)
        losses.append(epoch_loss / n)
    return Controller(layer_sizes, weights, biases, x_norm, y_norm), losses
