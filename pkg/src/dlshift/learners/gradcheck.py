"""Finite-difference verification of the neural cores' analytic gradients."""
from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from . import elman, mlp
from .base import Kind, Scaler, TrainingMatrix

_FLOOR = 1e-6


def _randomise(theta, rng):
    # non-zero biases so every parameter carries gradient signal
    return {k: v + 0.3 * rng.standard_normal(v.shape) for k, v in theta.items()}


def _problem(kind: Kind, data: TrainingMatrix, rng, hidden):
    y = Scaler.fit(data.y[:, None]).transform(data.y[:, None]).ravel()
    if kind is Kind.ANN:
        Z = Scaler.fit(data.X).transform(data.X)
        theta = _randomise(mlp.init_params(Z.shape[1], hidden, rng), rng)
        return theta, lambda th: mlp.loss_and_grad(th, Z, y)
    seq, static = elman.split_inputs(data.X, data.layout)
    st = elman._Standardiser(seq, static, data.y)
    zseq = (seq - st.seq_mean[0]) / st.seq_scale[0]
    zst = (static - st.st_mean) / st.st_scale
    theta = _randomise(elman.init_params(seq.shape[2], static.shape[1], hidden, rng), rng)
    return theta, lambda th: elman.loss_and_grad(th, zseq, zst, y)


def gradient_check(
    kind,
    data: TrainingMatrix,
    seed: int = 0,
    hidden: int = 4,
    step: float = 1e-5,
    gradient_scale: float = 1.0,
) -> float:
    """Max over all parameters of ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)``.

    Numeric gradients are central differences of the MSE loss with step
    ``step``. ``gradient_scale`` multiplies the analytic gradient and exists
    to confirm that the check catches a wrong gradient.
    """
    kind = Kind.parse(kind)
    if kind not in (Kind.ANN, Kind.RNN):
        raise ParameterError("gradient_check applies to ANN and RNN only")
    if len(data) > 50:
        raise ParameterError("gradient_check takes at most 50 rows")
    rng = np.random.default_rng(seed)
    theta, fn = _problem(kind, data, rng, hidden)
    _, grad = fn(theta)
    worst = 0.0
    for name, value in theta.items():
        analytic = gradient_scale * grad[name]
        flat = value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, _ = fn(theta)
            flat[i] = orig - step
            down, _ = fn(theta)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            a = analytic.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), _FLOOR)
            worst = max(worst, err)
    return worst
