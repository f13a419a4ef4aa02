"""Gradient boosting of shallow CART trees on squared error."""
from __future__ import annotations

import numpy as np

from . import cart

DEFAULT_GRID = [
    {"shrinkage": 0.05, "max_depth": 3, "max_rounds": 300, "patience": 20},
    {"shrinkage": 0.1, "max_depth": 3, "max_rounds": 300, "patience": 20},
]
_NO_KEYS = np.zeros((0, 1))


def _init(y) -> float:
    return float(y[0]) if np.ptp(y) == 0 else float(y.mean())


def _boost(X, y, hp, rounds, Xva=None, yva=None):
    """Run up to ``rounds`` rounds; with validation data, stop after ``patience`` stale rounds."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, p = X.shape
    nu = float(hp["shrinkage"])
    depth = int(hp.get("max_depth", 3))
    patience = int(hp.get("patience", rounds))
    sample = np.arange(n, dtype=np.int64)
    keys = np.zeros((0, p))
    f0 = _init(y)
    F = np.full(n, f0)
    trees = []
    curve = []
    if Xva is not None:
        Xva = np.ascontiguousarray(Xva, dtype=np.float64)
        G = np.full(len(yva), f0)
        best = np.inf
        stale = 0
    for _ in range(rounds):
        resid = y - F
        if np.all(resid == 0):
            break
        tree = cart.grow(X, np.ascontiguousarray(resid), sample, depth, p, keys)
        F += nu * cart.predict_tree(*tree, X, cart.UNLIMITED)
        trees.append(tree)
        if Xva is not None:
            G += nu * cart.predict_tree(*tree, Xva, cart.UNLIMITED)
            err = G - yva
            mse = float(err @ err) / len(err)
            curve.append(mse)
            if mse < best - 1e-15:
                best = mse
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    break
    if Xva is not None and not curve:
        err = np.full(len(yva), f0) - yva
        curve.append(float(err @ err) / len(err))
    return f0, trees, curve


def train(X, y, hp, seed=0, layout=None, threads=1):
    rounds = _cap(hp)
    f0, trees, _ = _boost(X, y, hp, rounds)
    params = cart.pack(trees)
    params["init"] = np.array([f0])
    params["shrinkage"] = np.array([float(hp["shrinkage"])])
    return params


def predict(params, hp, X, layout=None):
    return params["init"][0] + params["shrinkage"][0] * cart.ensemble_sum(params, X)


def fold_curves(Xtr, ytr, Xva, yva, grid, seed, layout=None, threads=1):
    """Validation MSE after each boosting round, one curve per grid point."""
    return [np.asarray(_boost(Xtr, ytr, hp, _cap(hp), Xva, yva)[2]) for hp in grid]


def _cap(hp) -> int:
    return int(hp.get("rounds", hp.get("max_rounds", 100)))


def finalize(hp: dict, best_index: int) -> dict:
    """Fix the round count at the CV optimum unless the grid point pins ``rounds``."""
    out = dict(hp)
    if "rounds" in hp:
        return out
    out["rounds"] = best_index + 1
    return out
