"""Ridge regression via the normal equations."""
from __future__ import annotations

import numpy as np
from scipy import linalg

from .base import Scaler

DEFAULT_GRID = [{"penalty": 0.0}, {"penalty": 1e-4}, {"penalty": 1e-2}, {"penalty": 1.0}]
# ratio of smallest to largest Cholesky pivot below which the system is treated as singular
_PIVOT_RATIO = 1e-7


def _solve(A: np.ndarray, b: np.ndarray):
    try:
        c, lower = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None
    d = np.abs(np.diag(c))
    if d.size and d.min() < _PIVOT_RATIO * d.max():
        return None
    return linalg.cho_solve((c, lower), b, check_finite=False)


def train(X, y, hp, seed=0, layout=None, threads=1, fallback_penalty=1.0):
    """Minimise ``mean((Xw + b - y)^2) + penalty * |w_std|^2`` on standardised columns.

    The coefficients are mapped back to raw feature units so that
    ``predict`` is exactly ``X @ weights + bias``.
    """
    scaler = Scaler.fit(X)
    Z = scaler.transform(X)
    y_mean = float(y.mean())
    n, p = Z.shape
    penalty = float(hp["penalty"])
    gram = Z.T @ Z / n
    rhs = Z.T @ (y - y_mean) / n
    beta = _solve(gram + penalty * np.eye(p), rhs)
    if beta is None:
        penalty = max(float(hp.get("fallback_penalty", fallback_penalty)), penalty)
        beta = _solve(gram + penalty * np.eye(p), rhs)
        if beta is None:  # only possible for degenerate inputs
            beta = np.zeros(p)
    weights = beta / scaler.scale
    bias = y_mean - float(weights @ scaler.mean)
    return {"weights": weights, "bias": np.array([bias]), "penalty_used": np.array([penalty])}


def predict(params, hp, X, layout=None):
    return np.asarray(X, dtype=float) @ params["weights"] + params["bias"][0]
