"""One-hidden-layer tanh network trained full-batch with Adam.

The loss/gradient kernel and the optimiser loop are compiled with numba;
parameters live in one flat vector ``[W1 (p*h), b1 (h), W2 (h), b2 (1)]``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .base import Scaler

DEFAULT_GRID = [{"hidden": 8}, {"hidden": 16}, {"hidden": 32}]
EPOCHS = 40
LEARNING_RATE = 0.08

PARAM_NAMES = ("W1", "b1", "W2", "b2")


def init_params(p: int, hidden: int, rng: np.random.Generator) -> dict:
    return {
        "W1": rng.standard_normal((p, hidden)) / np.sqrt(p),
        "b1": np.zeros(hidden),
        "W2": rng.standard_normal(hidden) / np.sqrt(hidden),
        "b2": np.zeros(1),
    }


def pack(theta: dict) -> np.ndarray:
    return np.concatenate([np.ravel(theta[k]) for k in PARAM_NAMES]).astype(np.float64)


def unpack(vec: np.ndarray, p: int, hidden: int) -> dict:
    a = p * hidden
    return {
        "W1": vec[:a].reshape(p, hidden).copy(),
        "b1": vec[a : a + hidden].copy(),
        "W2": vec[a + hidden : a + 2 * hidden].copy(),
        "b2": vec[a + 2 * hidden : a + 2 * hidden + 1].copy(),
    }


@njit(cache=True, nogil=True)
def _loss_grad(vec, Z, t, hidden, grad):
    n, p = Z.shape
    a = p * hidden
    grad[:] = 0.0
    H = np.empty(hidden)
    loss = 0.0
    b2 = vec[a + 2 * hidden]
    for i in range(n):
        f = b2
        for k in range(hidden):
            s = vec[a + k]
            for j in range(p):
                s += Z[i, j] * vec[j * hidden + k]
            H[k] = np.tanh(s)
            f += H[k] * vec[a + hidden + k]
        r = f - t[i]
        loss += r * r
        dF = 2.0 * r / n
        grad[a + 2 * hidden] += dF
        for k in range(hidden):
            grad[a + hidden + k] += H[k] * dF
            dH = dF * vec[a + hidden + k] * (1.0 - H[k] * H[k])
            grad[a + k] += dH
            for j in range(p):
                grad[j * hidden + k] += Z[i, j] * dH
    return loss / n


@njit(cache=True, nogil=True)
def _adam(vec, Z, t, hidden, epochs, lr):
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m = np.zeros_like(vec)
    v = np.zeros_like(vec)
    grad = np.empty_like(vec)
    for step in range(1, epochs + 1):
        _loss_grad(vec, Z, t, hidden, grad)
        c1 = 1.0 - beta1**step
        c2 = 1.0 - beta2**step
        for i in range(vec.size):
            g = grad[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
            vec[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)
    return vec


def forward(theta, Z):
    H = np.tanh(Z @ theta["W1"] + theta["b1"])
    return H @ theta["W2"] + theta["b2"][0], H


def loss_and_grad(theta, Z, t):
    """Mean squared error and its gradient with respect to every parameter."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    p, hidden = theta["W1"].shape
    vec = pack(theta)
    grad = np.empty_like(vec)
    loss = _loss_grad(vec, Z, np.ascontiguousarray(t, dtype=np.float64), hidden, grad)
    return float(loss), unpack(grad, p, hidden)


def train(X, y, hp, seed=0, layout=None, threads=1):
    rng = np.random.default_rng(seed)
    xs = Scaler.fit(X)
    ys = Scaler.fit(y[:, None])
    Z = np.ascontiguousarray(xs.transform(X))
    t = np.ascontiguousarray(ys.transform(y[:, None]).ravel())
    hidden = int(hp["hidden"])
    theta = init_params(Z.shape[1], hidden, rng)
    if np.ptp(y) == 0:  # constant target: the output layer alone reproduces it
        theta["W2"][:] = 0.0
    else:
        vec = _adam(
            pack(theta), Z, t, hidden, int(hp.get("epochs", EPOCHS)), float(hp.get("lr", LEARNING_RATE))
        )
        theta = unpack(vec, Z.shape[1], hidden)
    theta.update(x_mean=xs.mean, x_scale=xs.scale, y_mean=ys.mean, y_scale=ys.scale)
    return theta


def predict(params, hp, X, layout=None):
    Z = (np.asarray(X, dtype=float) - params["x_mean"]) / params["x_scale"]
    f, _ = forward(params, Z)
    return f * params["y_scale"][0] + params["y_mean"][0]
