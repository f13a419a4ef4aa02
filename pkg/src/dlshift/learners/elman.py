"""Elman recurrent network over the trajectory, with a linear head.

The trajectory is fed one step at a time (each step a ``step_width`` vector);
the terminal hidden state is concatenated with the static columns and mapped
to the output by a linear layer. Gradients come from backpropagation through
time.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .base import FeatureLayout
from .optim import adam

DEFAULT_GRID = [{"hidden": 8}, {"hidden": 16}]
EPOCHS = 400
LEARNING_RATE = 0.02

PARAM_NAMES = ("Wx", "Wh", "bh", "wo", "ws", "bo")


def split_inputs(X, layout: FeatureLayout):
    if layout is None or layout.trajectory is None:
        raise ContractError("the recurrent core needs a layout with a trajectory span")
    a, b = layout.trajectory
    seq = np.asarray(X[:, a:b], dtype=float).reshape(len(X), layout.steps, layout.step_width)
    static = np.asarray(X[:, layout.static_indices], dtype=float)
    return seq, static


def init_params(step_width: int, n_static: int, hidden: int, rng: np.random.Generator) -> dict:
    return {
        "Wx": rng.standard_normal((step_width, hidden)) / np.sqrt(step_width),
        "Wh": 0.5 * rng.standard_normal((hidden, hidden)) / np.sqrt(hidden),
        "bh": np.zeros(hidden),
        "wo": rng.standard_normal(hidden) / np.sqrt(hidden),
        "ws": np.zeros(n_static),
        "bo": np.zeros(1),
    }


def forward(theta, seq, static):
    n, T, _ = seq.shape
    H = np.zeros((n, theta["Wh"].shape[0]))
    states = [H]
    for k in range(T):
        H = np.tanh(seq[:, k, :] @ theta["Wx"] + H @ theta["Wh"] + theta["bh"])
        states.append(H)
    out = H @ theta["wo"] + static @ theta["ws"] + theta["bo"][0]
    return out, states


def loss_and_grad(theta, seq, static, t):
    n, T, _ = seq.shape
    f, states = forward(theta, seq, static)
    r = f - t
    loss = float(r @ r) / n
    dF = 2.0 * r / n
    grad = {
        "wo": states[-1].T @ dF,
        "ws": static.T @ dF,
        "bo": np.array([dF.sum()]),
        "Wx": np.zeros_like(theta["Wx"]),
        "Wh": np.zeros_like(theta["Wh"]),
        "bh": np.zeros_like(theta["bh"]),
    }
    dH = np.outer(dF, theta["wo"])
    for k in range(T, 0, -1):
        H = states[k]
        dA = dH * (1.0 - H * H)
        grad["Wx"] += seq[:, k - 1, :].T @ dA
        grad["Wh"] += states[k - 1].T @ dA
        grad["bh"] += dA.sum(axis=0)
        dH = dA @ theta["Wh"].T
    return loss, grad


class _Standardiser:
    def __init__(self, seq, static, y):
        self.seq_mean = np.array([seq.mean()]) if seq.size else np.zeros(1)
        s = seq.std() if seq.size else 1.0
        self.seq_scale = np.array([s if s > 1e-12 else 1.0])
        self.st_mean = static.mean(axis=0) if len(static) else np.zeros(static.shape[1])
        sd = static.std(axis=0) if len(static) else np.ones(static.shape[1])
        self.st_scale = np.where(sd > 1e-12, sd, 1.0)
        self.y_mean = np.array([y.mean()])
        ys = y.std()
        self.y_scale = np.array([ys if ys > 1e-12 else 1.0])


def _apply(params, seq, static):
    return (
        (seq - params["seq_mean"][0]) / params["seq_scale"][0],
        (static - params["st_mean"]) / params["st_scale"],
    )


def train(X, y, hp, seed=0, layout=None, threads=1):
    rng = np.random.default_rng(seed)
    seq, static = split_inputs(X, layout)
    st = _Standardiser(seq, static, y)
    scaling = {
        "seq_mean": st.seq_mean,
        "seq_scale": st.seq_scale,
        "st_mean": st.st_mean,
        "st_scale": st.st_scale,
        "y_mean": st.y_mean,
        "y_scale": st.y_scale,
    }
    zseq, zstatic = _apply(scaling, seq, static)
    t = (y - st.y_mean[0]) / st.y_scale[0]
    theta = init_params(seq.shape[2], static.shape[1], int(hp["hidden"]), rng)
    if np.ptp(y) == 0:  # constant target
        for k in ("wo", "ws", "bo"):
            theta[k][:] = 0.0
        theta.update(scaling)
        return theta
    theta = adam(
        lambda th: loss_and_grad(th, zseq, zstatic, t),
        theta,
        epochs=int(hp.get("epochs", EPOCHS)),
        lr=float(hp.get("lr", LEARNING_RATE)),
    )
    theta.update(scaling)
    return theta


def predict(params, hp, X, layout=None):
    seq, static = split_inputs(np.asarray(X, dtype=float), layout)
    zseq, zstatic = _apply(params, seq, static)
    f, _ = forward(params, zseq, zstatic)
    return f * params["y_scale"][0] + params["y_mean"][0]
