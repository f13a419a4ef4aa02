"""g-functions and chargeback rates.

Per score ``s`` and period:

* ``g1 = #(bank auth, non-fraud) / n_bank``
* ``g2 = #(bank auth, fraud) / n_bank``
* ``g3 = #(bank auth, MR approved, non-fraud) / n_rev``
* ``g4 = #(bank auth, MR approved, fraud) / n_rev``
* ``g5 = #(bank auth) / n_bank``

where ``n_bank`` counts score-``s`` transactions sent to the bank (inline
decision not Reject) and ``n_rev`` counts those routed to review and
authorized by the bank. A zero denominator yields Missing, stored as NaN.

:class:`TransactionHistory` answers "what did the g-table of period ``p``
look like at the start of period ``t``" for every ``(p, t)`` from a single
pass over the stream, by bucketing fraud labels on the period in which they
became visible.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import MaturityError, ParameterError, UndefinedEstimateError
from .stream import (
    APPROVE,
    AUTHORIZED,
    MR_APPROVED,
    REJECT,
    REVIEW,
    BankDecision,
    InlineDecision,
    MRDecision,
    PeriodGrid,
    Transaction,
    TransactionTable,
    as_of_view,
)

N_G = 5


@dataclass
class GTable:
    period: int | None
    scores: tuple[int, ...]
    values: np.ndarray  # (len(scores), 5); NaN marks Missing
    n_bank: np.ndarray
    n_rev: np.ndarray

    def value(self, score: int, j: int) -> float | None:
        v = self.values[self.scores.index(score), j - 1]
        return None if math.isnan(v) else float(v)


def _score_index(scores: Sequence[int]) -> dict[int, int]:
    return {int(s): i for i, s in enumerate(scores)}


def compute_g(
    txns: Sequence[Transaction],
    score_support: Sequence[int],
    *,
    period: int | None = None,
    now: int | None = None,
    lead_time: int | None = None,
    grid: PeriodGrid | None = None,
) -> GTable:
    """g-table of one period from its (mature) transactions.

    When ``now``, ``lead_time`` and ``grid`` are all given, any transaction
    received after period ``now - lead_time`` raises :class:`MaturityError`.
    """
    index = _score_index(score_support)
    k = len(index)
    if None not in (now, lead_time, grid):
        for txn in txns:
            if grid.period_of(txn.receiving_time) > now - lead_time:
                raise MaturityError(
                    f"transaction at period {grid.period_of(txn.receiving_time)} is not mature at now={now}"
                )
    n_bank = np.zeros(k, dtype=np.int64)
    n_auth = np.zeros(k, dtype=np.int64)
    n_auth_fraud = np.zeros(k, dtype=np.int64)
    n_rev = np.zeros(k, dtype=np.int64)
    n_rev_app = np.zeros(k, dtype=np.int64)
    n_rev_app_fraud = np.zeros(k, dtype=np.int64)
    for txn in txns:
        try:
            i = index[txn.risk_score]
        except KeyError:
            raise ParameterError(f"risk score {txn.risk_score} outside the score support") from None
        if txn.inline_decision is InlineDecision.REJECT:
            continue
        n_bank[i] += 1
        if txn.bank_decision is not BankDecision.AUTHORIZED:
            continue
        n_auth[i] += 1
        n_auth_fraud[i] += txn.fraud_flag
        if txn.inline_decision is InlineDecision.REVIEW:
            n_rev[i] += 1
            if txn.mr_decision is MRDecision.APPROVED:
                n_rev_app[i] += 1
                n_rev_app_fraud[i] += txn.fraud_flag
    values = _g_from_counts(n_bank, n_auth, n_auth_fraud, n_rev, n_rev_app, n_rev_app_fraud)
    return GTable(period, tuple(int(s) for s in score_support), values, n_bank, n_rev)


def _g_from_counts(n_bank, n_auth, n_auth_fraud, n_rev, n_rev_app, n_rev_app_fraud):
    shape = np.broadcast(n_bank, n_auth_fraud).shape
    out = np.full(shape + (N_G,), np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        nb = np.where(n_bank > 0, n_bank, 1).astype(np.float64)
        nr = np.where(n_rev > 0, n_rev, 1).astype(np.float64)
        bank_ok = n_bank > 0
        rev_ok = n_rev > 0
        out[..., 0] = np.where(bank_ok, (n_auth - n_auth_fraud) / nb, np.nan)
        out[..., 1] = np.where(bank_ok, n_auth_fraud / nb, np.nan)
        out[..., 2] = np.where(rev_ok, (n_rev_app - n_rev_app_fraud) / nr, np.nan)
        out[..., 3] = np.where(rev_ok, n_rev_app_fraud / nr, np.nan)
        out[..., 4] = np.where(bank_ok, n_auth / nb, np.nan)
    return out


def full_chargeback_rate(txns: Sequence[Transaction]) -> float:
    """Fraud-flagged finally-approved over finally-approved; NaN if none approved."""
    approved = 0
    flagged = 0
    for txn in txns:
        if txn.finally_approved:
            approved += 1
            flagged += txn.fraud_flag
    return flagged / approved if approved else math.nan


def partial_chargeback_rate(
    txns: Sequence[Transaction], observation_period: float, grid: PeriodGrid = PeriodGrid()
) -> float:
    """Chargeback rate of one period counting only labels visible at ``observation_period``."""
    if txns:
        first = min(grid.period_of(t.receiving_time) for t in txns)
        if not first < observation_period:
            raise ParameterError("observation period must come after the transactions' period")
    return full_chargeback_rate(as_of_view(txns, observation_period, grid))


# ---------------------------------------------------------------------------
# action sequences and the rho-hat bridge


class Action(enum.Enum):
    APP = "App"
    REV = "Rev"
    REJ = "Rej"


_INLINE_TO_ACTION = {
    InlineDecision.APPROVE: Action.APP,
    InlineDecision.REVIEW: Action.REV,
    InlineDecision.REJECT: Action.REJ,
}
_CODE_TO_ACTION = {APPROVE: Action.APP, REVIEW: Action.REV, REJECT: Action.REJ}


@dataclass(frozen=True)
class ActionSequence:
    actions: tuple[Action, ...]
    scores: tuple[int, ...]

    def __post_init__(self):
        if len(self.actions) != len(self.scores):
            raise ParameterError("actions and scores must have equal length")

    def __len__(self):
        return len(self.actions)

    @classmethod
    def from_transactions(cls, txns: Sequence[Transaction]) -> "ActionSequence":
        return cls(
            tuple(_INLINE_TO_ACTION[t.inline_decision] for t in txns),
            tuple(t.risk_score for t in txns),
        )

    @classmethod
    def from_codes(cls, inline_codes, scores) -> "ActionSequence":
        return cls(
            tuple(_CODE_TO_ACTION[int(c)] for c in inline_codes),
            tuple(int(s) for s in scores),
        )


def estimate_rho(seq: ActionSequence, g2_hat: Mapping[int, float], g4_hat: Mapping[int, float]) -> float:
    """Action-weighted chargeback-rate estimate for the current period.

    Approved actions contribute ``g2_hat[s]``, reviewed actions ``g4_hat[s]``;
    the sum is divided by the number of non-rejected actions.
    """
    total = 0.0
    used = 0
    for action, score in zip(seq.actions, seq.scores):
        if action is Action.REJ:
            continue
        table = g2_hat if action is Action.APP else g4_hat
        value = table.get(score)
        if value is None or math.isnan(value):
            name = "g2" if action is Action.APP else "g4"
            raise ParameterError(f"no {name} estimate for score {score} ({action.value})")
        total += value
        used += 1
    if used == 0:
        raise UndefinedEstimateError("every action is Rej; the estimate is undefined")
    return total / used


# ---------------------------------------------------------------------------
# histories


def forward_fill(values: np.ndarray) -> np.ndarray:
    """Carry the last non-NaN value forward along axis 0."""
    out = np.array(values, dtype=float, copy=True)
    for p in range(1, out.shape[0]):
        gap = np.isnan(out[p])
        out[p][gap] = out[p - 1][gap]
    return out


class EnvironmentHistory:
    """Period-indexed g-values and chargeback rates as seen from any observation period.

    Subclasses implement :meth:`g` and :meth:`partial_rate`. Entries for
    periods not yet started at the observation point are NaN.
    """

    scores: tuple[int, ...]
    n_periods: int
    horizon: int
    grid: PeriodGrid | None = None

    def g(self, as_of: int) -> np.ndarray:
        """Array ``(n_periods, |S|, 5)`` of g-values known at the start of ``as_of``."""
        raise NotImplementedError

    def partial_rate(self, as_of: int) -> np.ndarray:
        """Array ``(n_periods,)`` of chargeback rates known at the start of ``as_of``."""
        raise NotImplementedError

    def g_final(self) -> np.ndarray:
        return self.g(self.horizon)

    def full_rate(self) -> np.ndarray:
        return self.partial_rate(self.horizon)

    def actions(self, period: int) -> ActionSequence:
        raise NotImplementedError(f"{type(self).__name__} records no action sequences")

    def is_mature(self, period: int, lead_time: int) -> bool:
        return period + lead_time <= self.horizon

    def aggregate_g(self, as_of: int, j: int = 1) -> np.ndarray:
        raise NotImplementedError


class TransactionHistory(EnvironmentHistory):
    """History backed by a transaction stream.

    ``horizon`` is the observation period at which the data set was taken;
    labels visible only later are treated as unknown. It defaults to the
    latest period in which any recorded label became visible (or the number
    of periods, whichever is larger), i.e. the file is taken as complete.
    """

    def __init__(
        self,
        table: TransactionTable,
        grid: PeriodGrid,
        scores: Sequence[int],
        horizon: int | None = None,
    ):
        self.table = table
        self.grid = grid
        self.scores = tuple(int(s) for s in scores)
        sorted_scores = np.asarray(sorted(self.scores))
        order = np.argsort(np.asarray(self.scores), kind="stable")
        pos = np.searchsorted(sorted_scores, table.risk_score)
        pos = np.clip(pos, 0, len(sorted_scores) - 1)
        if len(table) and np.any(sorted_scores[pos] != table.risk_score):
            bad = sorted(set(table.risk_score[sorted_scores[pos] != table.risk_score].tolist()))
            raise ParameterError(f"risk scores outside the score support: {bad[:10]}")
        si = order[pos]
        period = grid.period_of(table.receiving_time) if len(table) else np.zeros(0, np.int64)
        if len(table) and period.min() < 0:
            raise ParameterError("epoch is later than the earliest receiving_time")
        self.period = period
        self.n_periods = int(period.max()) + 1 if len(table) else 0
        vis = table.label_visible_period(grid)
        max_vis = int(vis[table.fraud].max()) if table.fraud.any() else 0
        self.horizon = int(horizon) if horizon is not None else max(self.n_periods, max_vis)
        P, S, V = self.n_periods, len(self.scores), self.horizon + 2
        self._si = si

        sent = table.inline != REJECT
        auth = sent & (table.bank == AUTHORIZED)
        rev = auth & (table.inline == REVIEW)
        rev_app = rev & (table.mr == MR_APPROVED)
        approved = table.finally_approved()
        fraud = table.fraud
        visc = np.clip(vis, 0, V - 1)

        def count2(mask):
            out = np.zeros((P, S), dtype=np.int64)
            np.add.at(out, (period[mask], si[mask]), 1)
            return out

        def count3(mask):
            out = np.zeros((P, S, V), dtype=np.int64)
            np.add.at(out, (period[mask], si[mask], visc[mask]), 1)
            return np.cumsum(out, axis=2)

        self.n_bank = count2(sent)
        self.n_auth = count2(auth)
        self.n_rev = count2(rev)
        self.n_rev_app = count2(rev_app)
        self._auth_fraud = count3(auth & fraud)
        self._rev_app_fraud = count3(rev_app & fraud)
        self.n_approved = np.bincount(period[approved], minlength=P).astype(np.int64)
        ap = np.zeros((P, V), dtype=np.int64)
        m = approved & fraud
        np.add.at(ap, (period[m], visc[m]), 1)
        self._approved_fraud = np.cumsum(ap, axis=1)
        self._g_cache: dict[int, np.ndarray] = {}
        self._rate_cache: dict[int, np.ndarray] = {}

    @classmethod
    def from_transactions(cls, txns, grid, scores, horizon=None) -> "TransactionHistory":
        return cls(TransactionTable.from_transactions(txns), grid, scores, horizon)

    def _col(self, as_of: int) -> int:
        return int(min(max(as_of, 0), self.horizon))

    def g(self, as_of: int) -> np.ndarray:
        v = self._col(as_of)
        if v not in self._g_cache:
            vals = _g_from_counts(
                self.n_bank,
                self.n_auth,
                self._auth_fraud[:, :, v],
                self.n_rev,
                self.n_rev_app,
                self._rev_app_fraud[:, :, v],
            )
            vals[min(max(as_of, 0), self.n_periods):] = np.nan
            vals.setflags(write=False)
            self._g_cache[v] = vals
        return self._g_cache[v]

    def partial_rate(self, as_of: int) -> np.ndarray:
        v = self._col(as_of)
        if v not in self._rate_cache:
            with np.errstate(invalid="ignore", divide="ignore"):
                r = np.where(
                    self.n_approved > 0,
                    self._approved_fraud[:, v] / np.maximum(self.n_approved, 1),
                    np.nan,
                )
            r[min(max(as_of, 0), self.n_periods):] = np.nan
            r.setflags(write=False)
            self._rate_cache[v] = r
        return self._rate_cache[v]

    def aggregate_g(self, as_of: int, j: int = 1) -> np.ndarray:
        """Score-pooled g_j per period (numerators and denominators summed over scores)."""
        v = self._col(as_of)
        nb = self.n_bank.sum(axis=1)
        nr = self.n_rev.sum(axis=1)
        af = self._auth_fraud[:, :, v].sum(axis=1)
        rf = self._rev_app_fraud[:, :, v].sum(axis=1)
        vals = _g_from_counts(nb, self.n_auth.sum(axis=1), af, nr, self.n_rev_app.sum(axis=1), rf)
        vals[min(max(as_of, 0), self.n_periods):] = np.nan
        return vals[:, j - 1]

    def actions(self, period: int) -> ActionSequence:
        m = self.period == period
        return ActionSequence.from_codes(self.table.inline[m], self.table.risk_score[m])

    def counts(self) -> tuple[np.ndarray, np.ndarray]:
        return self.n_bank, self.n_rev


@dataclass
class RateSeries:
    full: dict[int, float]
    partial: dict[tuple[int, int], float]


def rate_series(history: EnvironmentHistory, lead_time: int) -> RateSeries:
    """Full rates of mature periods and every partial rate within ``lead_time``."""
    full_arr = history.full_rate()
    full = {
        p: float(full_arr[p])
        for p in range(history.n_periods)
        if history.is_mature(p, lead_time) and not math.isnan(full_arr[p])
    }
    partial = {}
    for t in range(1, min(history.horizon, history.n_periods + lead_time) + 1):
        r = history.partial_rate(t)
        for p in range(max(0, t - lead_time), min(t, history.n_periods)):
            if not math.isnan(r[p]):
                partial[(p, t)] = float(r[p])
    return RateSeries(full, partial)


def export_gtables(history: EnvironmentHistory, path, as_of: int | None = None) -> None:
    """Write ``period, score, g1..g5, n_bank, n_rev``; Missing is an empty field."""
    vals = history.g(history.horizon if as_of is None else as_of)
    counts = history.counts() if hasattr(history, "counts") else None
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "score", "g1", "g2", "g3", "g4", "g5", "n_bank", "n_rev"])
        for p in range(history.n_periods):
            for i, s in enumerate(history.scores):
                row = [p, s] + ["" if math.isnan(x) else repr(float(x)) for x in vals[p, i]]
                if counts is not None:
                    row += [int(counts[0][p, i]), int(counts[1][p, i])]
                else:
                    row += ["", ""]
                w.writerow(row)
