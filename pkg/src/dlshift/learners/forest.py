"""Bootstrap random forest of CART trees with per-node feature subsampling."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cart

N_TREES = 100
DEFAULT_GRID = [{"max_depth": 4}, {"max_depth": 8}, {"max_depth": cart.UNLIMITED}]


def _max_features(p: int) -> int:
    return max(1, int(np.sqrt(p)))


def grow_forest(X, y, seed, n_trees=N_TREES, threads=1):
    """Grow unlimited-depth trees; depth limits are applied at prediction time."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    k = _max_features(p)

    def one(b):
        rng = np.random.default_rng([seed, b])
        sample = rng.integers(0, n, size=n).astype(np.int64)
        keys = rng.random((2 * n + 1, p))
        return cart.grow(X, y, sample, cart.UNLIMITED, k, keys)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(one, range(n_trees)))
    else:
        trees = [one(b) for b in range(n_trees)]
    params = cart.pack(trees)
    params["n_trees"] = np.array([n_trees], dtype=np.int64)
    return params


def train(X, y, hp, seed=0, layout=None, threads=1):
    return grow_forest(X, y, seed, int(hp.get("n_trees", N_TREES)), threads)


def predict(params, hp, X, layout=None):
    depth = int(hp["max_depth"]) if hp.get("max_depth") is not None else cart.UNLIMITED
    return cart.ensemble_sum(params, X, depth) / params["n_trees"][0]


def fold_curves(Xtr, ytr, Xva, yva, grid, seed, layout=None, threads=1):
    """Validation MSE of every depth setting from one shared forest."""
    params = grow_forest(Xtr, ytr, seed, int(grid[0].get("n_trees", N_TREES)), threads)
    out = []
    for hp in grid:
        err = predict(params, hp, Xva) - yva
        out.append(np.array([float(err @ err) / len(err)]))
    return out
