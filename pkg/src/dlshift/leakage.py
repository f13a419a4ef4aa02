"""Leakage audit: rebuild training matrices from as-of snapshots of raw transactions.

This path shares no code with the count-cube history: every feature is
recomputed from :func:`as_of_view` copies of the period buckets, one
observation point at a time, then compared bit for bit with the fast
matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cei import CeiConfig, first_row_period
from .fei import FeiConfig, first_row_period_II
from .gfunc import compute_g, full_chargeback_rate, partial_chargeback_rate
from .learners import TrainingMatrix
from .stream import PeriodGrid, Transaction, as_of_view, discretize


class SnapshotOracle:
    def __init__(self, txns: Sequence[Transaction], scores, grid: PeriodGrid, L: int):
        self.buckets = discretize(list(txns), grid.period_length, grid.epoch)
        self.scores = tuple(scores)
        self.grid = grid
        self.L = L
        self._g: dict[tuple[int, int], np.ndarray] = {}

    def g(self, period: int, as_of: int) -> np.ndarray:
        """g-values ``(S, 5)`` of a mature period as seen at ``as_of``."""
        key = (period, as_of)
        if key not in self._g:
            view = as_of_view(self.buckets.get(period, []), as_of, self.grid)
            table = compute_g(view, self.scores, period=period, now=as_of, lead_time=self.L, grid=self.grid)
            self._g[key] = table.values
        return self._g[key]

    def filled(self, period: int, as_of: int, j: int, si: int) -> float:
        """``g_j`` with carry-forward: the latest non-Missing value at or before ``period``."""
        for p in range(period, -1, -1):
            v = self.g(p, as_of)[si, j - 1]
            if not math.isnan(v):
                return float(v)
        return math.nan

    def partial(self, period: int, as_of: int) -> float:
        return partial_chargeback_rate(self.buckets.get(period, []), as_of, self.grid)

    def full(self, period: int, now: int) -> float:
        return full_chargeback_rate(as_of_view(self.buckets.get(period, []), now, self.grid))


def _rows_to_matrix(rows, template: TrainingMatrix) -> TrainingMatrix:
    X = np.array([r[0] for r in rows]) if rows else np.zeros((0, template.X.shape[1]))
    y = np.array([r[1] for r in rows])
    return TrainingMatrix(X, y, template.layout, np.array([r[2] for r in rows]), [r[3] for r in rows])


def slow_cei_matrix(oracle: SnapshotOracle, now: int, cfg: CeiConfig, template: TrainingMatrix) -> TrainingMatrix:
    rows = []
    for t in range(first_row_period(cfg), now - cfg.L + 1):
        rate = oracle.partial(t - cfg.l, t)
        for si, s in enumerate(oracle.scores):
            traj = [oracle.filled(p, t, cfg.target, si) for p in range(t - cfg.L - cfg.D + 1, t - cfg.L + 1)]
            y = oracle.g(t, now)[si, cfg.target - 1]
            x = [s, t, *traj, rate]
            if all(not math.isnan(v) for v in x) and not math.isnan(y):
                rows.append((x, y, t, (int(s), t)))
    return _rows_to_matrix(rows, template)


def slow_fei_matrix(oracle: SnapshotOracle, now: int, cfg: FeiConfig, template: TrainingMatrix) -> TrainingMatrix:
    rows = []
    for t in range(first_row_period_II(cfg), now - cfg.L - cfg.l + 1):
        rho = oracle.full(t, now)
        for si, s in enumerate(oracle.scores):
            traj = [oracle.filled(p, t, 1, si) for p in range(t - cfg.L - cfg.D + cfg.l + 1, t - cfg.L + 1)]
            y = oracle.g(t + cfg.l, now)[si, 0]
            x = [s, t + cfg.l, *traj, rho]
            if all(not math.isnan(v) for v in x) and not math.isnan(y):
                rows.append((x, y, t, (int(s), t)))
    return _rows_to_matrix(rows, template)


@dataclass
class AuditResult:
    rows_fast: int
    rows_slow: int
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.rows_fast == self.rows_slow and not self.mismatches


def compare(fast: TrainingMatrix, slow: TrainingMatrix) -> AuditResult:
    res = AuditResult(len(fast), len(slow))
    if fast.keys != slow.keys:
        res.mismatches.append(("row keys differ", None, None))
        return res
    for i, key in enumerate(fast.keys):
        if not np.array_equal(fast.X[i], slow.X[i]) or fast.y[i] != slow.y[i]:
            res.mismatches.append((key, fast.X[i].tolist() + [fast.y[i]], slow.X[i].tolist() + [slow.y[i]]))
    return res
