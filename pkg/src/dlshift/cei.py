"""Current environment inference.

A row for score ``s`` and historic period ``t`` pairs the mature trajectory
``g_j`` over periods ``t-L-D+1 .. t-L`` (as known at the start of ``t``)
with the biased chargeback rate of period ``t-l`` observed at ``t``. The
response is ``g_j`` of period ``t`` itself, which is final once
``t <= now - L``. Prediction assembles the same features with ``t = now``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, InsufficientHistoryError, ParameterError
from .gfunc import EnvironmentHistory, TransactionHistory, forward_fill
from .learners import FeatureLayout, Kind, LearnerModel, TrainingMatrix, fit
from .stream import PeriodGrid, Transaction, TransactionTable

log = logging.getLogger(__name__)


@dataclass
class CeiConfig:
    L: int = 12
    D: int = 4
    l: int = 2
    target: int = 1
    kind: str = "LR"
    scores: tuple[int, ...] | None = None
    cv_folds: int = 3
    seed: int = 0
    grid: list | None = None
    threads: int = 1

    def __post_init__(self):
        self.kind = Kind.parse(self.kind).value
        if self.scores is not None:
            self.scores = tuple(int(s) for s in self.scores)
        self.validate()

    def validate(self) -> None:
        if not 1 <= self.l < self.L:
            raise ParameterError(f"need 1 <= l < L, got l={self.l}, L={self.L}")
        if self.D < 1:
            raise ParameterError("D must be >= 1")
        if self.target not in (1, 2, 3, 4):
            raise ParameterError("target must be one of g1..g4")

    def fingerprint(self, scores: Sequence[int]) -> dict:
        return {"L": self.L, "D": self.D, "l": self.l, "scores": [int(s) for s in scores]}


def as_history(stream, scores=None, grid: PeriodGrid | None = None) -> EnvironmentHistory:
    """Accept a history, a TransactionTable, or a list of transactions."""
    if isinstance(stream, EnvironmentHistory):
        return stream
    table = stream if isinstance(stream, TransactionTable) else TransactionTable.from_transactions(list(stream))
    if scores is None:
        scores = sorted(set(table.risk_score.tolist()))
    return TransactionHistory(table, grid or PeriodGrid(), scores)


def _scores(history: EnvironmentHistory, cfg: CeiConfig) -> tuple[int, ...]:
    if cfg.scores is not None and tuple(cfg.scores) != tuple(history.scores):
        raise ParameterError("configured score support differs from the stream's")
    return tuple(history.scores)


def layout(D: int, target: int = 1, rate_name: str = "rho_partial") -> FeatureLayout:
    names = ["score", "period"] + [f"g{target}_lag{D - k}" for k in range(D)] + [rate_name]
    return FeatureLayout(tuple(names), trajectory=(2, 2 + D))


def first_row_period(cfg: CeiConfig) -> int:
    return max(cfg.L + cfg.D - 1, cfg.l)


def first_usable_now(cfg: CeiConfig) -> int:
    return first_row_period(cfg) + cfg.L


class _Snapshots:
    """Forward-filled g-slices and partial rates per observation period."""

    def __init__(self, history: EnvironmentHistory, j: int):
        self.history = history
        self.j = j
        self._g: dict[int, np.ndarray] = {}

    def traj(self, as_of: int) -> np.ndarray:
        if as_of not in self._g:
            self._g[as_of] = forward_fill(self.history.g(as_of)[:, :, self.j - 1])
        return self._g[as_of]

    def rate(self, as_of: int, period: int) -> float:
        return float(self.history.partial_rate(as_of)[period])


def _feature_block(snap: _Snapshots, scores, t: int, cfg: CeiConfig) -> tuple[np.ndarray, np.ndarray]:
    """Features for every score at period ``t``; second value marks usable rows."""
    g = snap.traj(t)
    lo, hi = t - cfg.L - cfg.D + 1, t - cfg.L
    traj = g[lo : hi + 1, :].T  # (S, D), oldest first
    rate = snap.rate(t, t - cfg.l)
    S = len(scores)
    X = np.empty((S, cfg.D + 3))
    X[:, 0] = scores
    X[:, 1] = t
    X[:, 2 : 2 + cfg.D] = traj
    X[:, -1] = rate
    ok = ~np.isnan(X).any(axis=1)
    return X, ok


def build_training(stream, now: int, cfg: CeiConfig) -> TrainingMatrix:
    """Training matrix for target ``g_j`` from everything observable at ``now``."""
    history = as_history(stream, cfg.scores)
    scores = _scores(history, cfg)
    t0, t1 = first_row_period(cfg), now - cfg.L
    if t1 < t0:
        raise InsufficientHistoryError(
            f"no mature training rows at now={now}; first usable period is now={first_usable_now(cfg)}"
        )
    snap = _Snapshots(history, cfg.target)
    truth = history.g(now)[:, :, cfg.target - 1]
    blocks, ys, periods, keys = [], [], [], []
    for t in range(t0, t1 + 1):
        X, ok = _feature_block(snap, scores, t, cfg)
        y = truth[t]
        ok &= ~np.isnan(y)
        blocks.append(X[ok])
        ys.append(y[ok])
        periods.append(np.full(int(ok.sum()), t))
        keys.extend((int(s), t) for s, k in zip(scores, ok) if k)
    dropped = (t1 - t0 + 1) * len(scores) - len(keys)
    if dropped:
        log.info("dropped %d rows with unimputable features or Missing response", dropped)
    return TrainingMatrix(
        np.vstack(blocks), np.concatenate(ys), layout(cfg.D, cfg.target), np.concatenate(periods), keys
    )


def train(stream, now: int, cfg: CeiConfig) -> LearnerModel:
    history = as_history(stream, cfg.scores)
    data = build_training(history, now, cfg)
    meta = {
        "framework": "CEI",
        "target": cfg.target,
        "now": int(now),
        "fingerprint": cfg.fingerprint(history.scores),
    }
    return fit(cfg.kind, data, cfg.cv_folds, cfg.seed, cfg.grid, cfg.threads, meta=meta)


def clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def check_fingerprint(model: LearnerModel, expected: dict) -> None:
    got = model.meta.get("fingerprint")
    if got != expected:
        raise ContractError(f"model was trained with {got}, current configuration is {expected}")


def current_features(history: EnvironmentHistory, now: int, cfg: CeiConfig):
    if now - cfg.L - cfg.D + 1 < 0 or now - cfg.l < 0:
        raise InsufficientHistoryError(f"not enough history to predict at now={now}")
    snap = _Snapshots(history, cfg.target)
    return _feature_block(snap, history.scores, now, cfg)


def predict_current(model: LearnerModel, stream, now: int, cfg: CeiConfig) -> dict[int, float | None]:
    """``score -> g_hat`` for period ``now``, clamped to [0, 1]; None marks Missing."""
    history = as_history(stream, cfg.scores)
    scores = _scores(history, cfg)
    check_fingerprint(model, cfg.fingerprint(scores))
    if model.meta.get("target", cfg.target) != cfg.target:
        raise ContractError(f"model predicts g{model.meta['target']}, configuration asks for g{cfg.target}")
    X, ok = current_features(history, now, cfg)
    out: dict[int, float | None] = {int(s): None for s in scores}
    if ok.any():
        raw = model.predict_matrix(X[ok], model.layout)
        for s, v in zip(np.asarray(scores)[ok], raw):
            out[int(s)] = clamp01(float(v))
    missing = [s for s, v in out.items() if v is None]
    if missing:
        log.warning("Missing prediction for scores %s at now=%d", missing, now)
    return out
