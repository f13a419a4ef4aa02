"""CART regression trees (squared-error splits), compiled with numba.

A tree is five parallel arrays indexed by node id: ``feature`` (-1 marks a
leaf), ``threshold`` (go left when ``x <= threshold``), ``left``/``right``
child ids, ``value`` (mean response of the node's samples) and ``depth``.
Internal nodes keep their mean so that a tree can be evaluated truncated at
any depth; a depth-``d`` truncation is exactly the tree greedy growth would
have produced with ``max_depth=d``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

UNLIMITED = -1


@njit(cache=True, nogil=True)
def _best_split(X, y, idx, start, end, features, n_try, n_features):
    """Scan candidate features of one node; returns (feature, threshold, position)."""
    cnt = end - start
    best_score = -np.inf
    best_f = -1
    best_thr = 0.0
    xs = np.empty(cnt)
    ys = np.empty(cnt)
    total = 0.0
    for i in range(cnt):
        total += y[idx[start + i]]
    parent = total * total / cnt
    tried = 0
    for fi in range(n_features):
        if best_f >= 0 and tried >= n_try:
            break
        f = features[fi]
        for i in range(cnt):
            xs[i] = X[idx[start + i], f]
        order = np.argsort(xs, kind="mergesort")
        if xs[order[0]] == xs[order[cnt - 1]]:
            continue  # constant here; does not count towards n_try
        tried += 1
        for i in range(cnt):
            ys[i] = y[idx[start + order[i]]]
        left = 0.0
        for i in range(cnt - 1):
            left += ys[i]
            a = xs[order[i]]
            b = xs[order[i + 1]]
            if a < b:
                nl = i + 1
                nr = cnt - nl
                right = total - left
                score = left * left / nl + right * right / nr
                if score > best_score:
                    best_score = score
                    best_f = f
                    thr = a + (b - a) * 0.5
                    if thr >= b:
                        thr = a
                    best_thr = thr
    if best_f < 0 or not best_score > parent + 1e-12 * abs(parent):
        return -1, 0.0
    return best_f, best_thr


@njit(cache=True, nogil=True)
def grow(X, y, sample, max_depth, max_features, feature_keys):
    """Grow one tree on rows ``sample`` (duplicates allowed, e.g. a bootstrap).

    ``feature_keys`` is an (n_nodes_max, n_features) array of random keys;
    at each node features are tried in increasing key order, and the search
    stops after ``max_features`` non-constant ones unless none of them
    yields a split. Pass an empty (0, n_features) array to try features in
    column order.
    """
    m = sample.shape[0]
    p = X.shape[1]
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    depth = np.zeros(cap, dtype=np.int64)
    seg_start = np.zeros(cap, dtype=np.int64)
    seg_end = np.zeros(cap, dtype=np.int64)
    idx = sample.copy()
    keyed = feature_keys.shape[0] > 0
    n_try = max_features if max_features > 0 else p
    default_order = np.arange(p)

    n_nodes = 1
    seg_start[0] = 0
    seg_end[0] = m
    stack = np.empty(cap, dtype=np.int64)
    top = 0
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        s = seg_start[node]
        e = seg_end[node]
        cnt = e - s
        total = 0.0
        lo = y[idx[s]]
        hi = lo
        for i in range(s, e):
            v = y[idx[i]]
            total += v
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        value[node] = lo if lo == hi else total / cnt
        if lo == hi or cnt < 2 or (max_depth >= 0 and depth[node] >= max_depth):
            continue
        if keyed:
            order = np.argsort(feature_keys[node % feature_keys.shape[0]])
        else:
            order = default_order
        f, thr = _best_split(X, y, idx, s, e, order, n_try, p)
        if f < 0:
            continue
        # partition the node's segment: x <= thr first
        i = s
        j = e - 1
        while i <= j:
            if X[idx[i], f] <= thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = f
        threshold[node] = thr
        left[node] = lc
        right[node] = rc
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1
        seg_start[lc] = s
        seg_end[lc] = i
        seg_start[rc] = i
        seg_end[rc] = e
        # right pushed first so the left subtree is expanded first
        stack[top] = rc
        top += 1
        stack[top] = lc
        top += 1
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        depth[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def predict_tree(feature, threshold, left, right, value, depth, X, max_depth):
    n = X.shape[0]
    out = np.empty(n)
    for r in range(n):
        node = 0
        while feature[node] >= 0 and (max_depth < 0 or depth[node] < max_depth):
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@njit(cache=True, nogil=True)
def predict_ensemble(offsets, feature, threshold, left, right, value, depth, X, max_depth):
    """Per-row sums over all trees (child ids are local to each tree)."""
    n = X.shape[0]
    out = np.zeros(n)
    n_trees = offsets.shape[0] - 1
    for r in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0 and (max_depth < 0 or depth[base + node] < max_depth):
                if X[r, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            acc += value[base + node]
        out[r] = acc
    return out


TREE_FIELDS = ("feature", "threshold", "left", "right", "value", "depth")


def pack(trees) -> dict:
    """Concatenate tree tuples into flat arrays with an ``offsets`` index."""
    sizes = [len(t[0]) for t in trees]
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(sizes)
    out = {"offsets": offsets}
    for k, name in enumerate(TREE_FIELDS):
        dtype = np.float64 if name in ("threshold", "value") else np.int64
        if trees:
            out[name] = np.concatenate([t[k] for t in trees]).astype(dtype)
        else:
            out[name] = np.zeros(0, dtype=dtype)
    return out


def ensemble_sum(params, X, max_depth=UNLIMITED) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    return predict_ensemble(
        params["offsets"],
        params["feature"],
        params["threshold"],
        params["left"],
        params["right"],
        params["value"],
        params["depth"],
        X,
        int(max_depth),
    )
