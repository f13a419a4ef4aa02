"""Synthetic transaction streams with a delayed-label feedback loop.

Banks and manual-review agents tighten their approval behaviour when the
chargeback rate they can currently *see* rises. Because chargebacks arrive
late, what they see is the biased partial rate, so the environment reacts to
a lagged and distorted signal of its own past. That is the regime the CEI/FEI
pipelines are built for.

All randomness for period ``t`` comes from ``numpy.random.default_rng([seed, t])``,
so any period's draws are fixed by (seed, t) alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .stream import (
    APPROVE,
    AUTHORIZED,
    DECLINED,
    DEFAULT_EPOCH,
    MR_APPROVED,
    MR_REJECTED,
    NOT_REVIEWED,
    NOT_SENT,
    REJECT,
    REVIEW,
    WEEK,
    PeriodGrid,
    Transaction,
    TransactionTable,
)

DEFAULT_SCORES = tuple(range(50, 1001, 50))


def _default_delay_weights(L: int = 12) -> tuple[float, ...]:
    return tuple(round(math.exp(-(d - 1) / 3.0), 6) for d in range(1, L + 1))


@dataclass
class GeneratorConfig:
    seed: int = 42
    periods: int = 40
    txns_per_period: int = 10000
    score_support: tuple[int, ...] = DEFAULT_SCORES
    # None -> quadratic ramp from 0.5% (lowest score) to 30% (highest score)
    base_fraud_rate_by_score: dict[int, float] | None = None
    feedback_gain: float = 0.6
    lead_time: int = 12
    # weights for delays 1..len(weights) periods; normalised on use
    maturity_delay_weights: tuple[float, ...] = field(default_factory=_default_delay_weights)
    drift: float = 0.003
    fraud_volatility: float = 0.001
    fraud_reversion: float = 0.5
    spike_period: int = -1
    spike_magnitude: float = 0.0
    feedback_window: int = 4
    reference_rate: float = 0.02
    epoch: float = DEFAULT_EPOCH
    period_length: float = WEEK

    def validate(self) -> None:
        if self.periods < 1:
            raise ConfigError("periods must be >= 1")
        if self.txns_per_period < 1:
            raise ConfigError("txns_per_period must be >= 1")
        if len(self.score_support) < 1 or len(set(self.score_support)) != len(self.score_support):
            raise ConfigError("score_support must be non-empty and distinct")
        if self.feedback_gain < 0:
            raise ConfigError("feedback_gain must be >= 0")
        if self.lead_time < 1:
            raise ConfigError("lead_time must be >= 1")
        w = np.asarray(self.maturity_delay_weights, dtype=float)
        if w.size == 0 or np.any(w < 0) or w.sum() <= 0:
            raise ConfigError("maturity_delay_weights must be non-negative with positive sum")
        if w.size > self.lead_time:
            raise ConfigError(
                f"delay distribution support 1..{w.size} exceeds lead_time L={self.lead_time}"
            )
        if self.feedback_window < 1:
            raise ConfigError("feedback_window must be >= 1")
        if not float(self.epoch).is_integer() or not float(self.period_length).is_integer():
            raise ConfigError("generator needs whole-second epoch and period_length")
        if self.period_length <= 0:
            raise ConfigError("period_length must be positive")
        rates = self.fraud_rates()
        if np.any(rates < 0) or np.any(rates > 1):
            raise ConfigError("base fraud rates must lie in [0, 1]")

    @property
    def grid(self) -> PeriodGrid:
        return PeriodGrid(float(self.epoch), float(self.period_length))

    def fraud_rates(self) -> np.ndarray:
        scores = np.asarray(self.score_support)
        if self.base_fraud_rate_by_score is not None:
            try:
                return np.array([float(self.base_fraud_rate_by_score[s]) for s in scores])
            except KeyError as exc:
                raise ConfigError(f"no base fraud rate for score {exc}") from None
        q = _position(len(scores))
        return 0.005 + 0.295 * q**2

    @property
    def label_horizon(self) -> int:
        """Observation period by which every generated label has matured."""
        return self.periods + len(self.maturity_delay_weights)


def _position(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)


def _logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p / (1 - p))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class _Behaviour:
    """Static per-score parts of the inline policy, bank and MR responses."""

    def __init__(self, n_scores: int):
        q = _position(n_scores)
        self.p_reject = 0.02 + 0.45 * q**2
        self.p_review = 0.12 + 0.16 * 4 * q * (1 - q)
        self.bank_nonfraud = _logit(0.97 - 0.10 * q)
        self.bank_fraud = _logit(0.55 - 0.25 * q)
        self.mr_nonfraud = _logit(np.full(n_scores, 0.93))
        self.mr_fraud = _logit(0.35 - 0.20 * q)


def generate_table(config: GeneratorConfig) -> TransactionTable:
    config.validate()
    scores = np.asarray(config.score_support, dtype=np.int64)
    n_scores = len(scores)
    base = config.fraud_rates()
    beh = _Behaviour(n_scores)
    weights = np.asarray(config.maturity_delay_weights, dtype=float)
    delay_cdf = np.cumsum(weights / weights.sum())
    delay_cdf[-1] = 1.0
    grid = config.grid
    plen = int(config.period_length)
    epoch = int(config.epoch)

    chunks = []
    # per-period summaries feeding the bank/MR reaction
    approved_counts = []
    # chargebacks of period p bucketed by the period in which they become visible
    visible_cb: list[np.ndarray] = []
    walk = 0.0
    for t in range(config.periods):
        rng = np.random.default_rng([config.seed, t])
        walk = (1.0 - config.fraud_reversion) * walk + config.fraud_volatility * rng.standard_normal()
        n = int(rng.poisson(config.txns_per_period))
        start = epoch + t * plen
        rt = np.sort(rng.integers(0, plen, size=n)) + start
        si = rng.integers(0, n_scores, size=n)

        pressure = config.drift * t + walk
        if t == config.spike_period:
            pressure += config.spike_magnitude
        p_fraud = np.clip(base[si] + pressure, 0.0, 1.0)
        fraud = rng.random(n) < p_fraud

        u = rng.random(n)
        inline = np.full(n, APPROVE, dtype=np.int8)
        inline[u < beh.p_review[si] + beh.p_reject[si]] = REVIEW
        inline[u < beh.p_reject[si]] = REJECT

        lo = max(0, t - config.feedback_window)
        denom = sum(approved_counts[lo:t])
        seen = sum(int(visible_cb[p][: t + 1].sum()) for p in range(lo, t))
        observed = seen / denom if denom else config.reference_rate
        shift = -config.feedback_gain * 100.0 * (observed - config.reference_rate)

        sent = inline != REJECT
        bank_logit = np.where(fraud, beh.bank_fraud[si], beh.bank_nonfraud[si]) + shift
        auth = sent & (rng.random(n) < _sigmoid(bank_logit))
        bank = np.full(n, NOT_SENT, dtype=np.int8)
        bank[sent] = DECLINED
        bank[auth] = AUTHORIZED

        reviewed = (inline == REVIEW) & auth
        mr_logit = np.where(fraud, beh.mr_fraud[si], beh.mr_nonfraud[si]) + shift
        mr_ok = reviewed & (rng.random(n) < _sigmoid(mr_logit))
        mr = np.full(n, NOT_REVIEWED, dtype=np.int8)
        mr[reviewed] = MR_REJECTED
        mr[mr_ok] = MR_APPROVED

        delay = np.searchsorted(delay_cdf, rng.random(n), side="right") + 1
        delay = np.minimum(delay, len(delay_cdf))
        # label becomes visible at the start of period t + delay
        m_lo = np.maximum(rt, start + (delay - 1) * plen)
        m_hi = start + delay * plen - 1
        maturity = m_lo + np.floor(rng.random(n) * (m_hi - m_lo + 1)).astype(np.int64)
        maturity_f = np.where(fraud, maturity.astype(np.float64), np.nan)

        approved = auth & ((inline == APPROVE) | mr_ok)
        approved_counts.append(int(approved.sum()))
        cb = np.zeros(t + len(delay_cdf) + 1, dtype=np.int64)
        np.add.at(cb, t + delay[approved & fraud], 1)
        visible_cb.append(cb)

        chunks.append(
            TransactionTable(
                receiving_time=rt.astype(np.float64),
                risk_score=scores[si],
                inline=inline,
                bank=bank,
                mr=mr,
                fraud=fraud,
                maturity_time=maturity_f,
            )
        )

    return TransactionTable(
        *(np.concatenate([getattr(c, f.name) for c in chunks]) for f in fields(TransactionTable))
    )


def generate(config: GeneratorConfig) -> list[Transaction]:
    return generate_table(config).to_transactions()


# ---------------------------------------------------------------------------
# flat key=value config files


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _int_list(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in v.split(",") if x.strip())


def _float_list(v: str) -> tuple[float, ...]:
    return tuple(float(x) for x in v.split(",") if x.strip())


def _score_rates(v: str) -> dict[int, float]:
    out = {}
    for item in v.split(","):
        if item.strip():
            s, r = item.split(":")
            out[int(s)] = float(r)
    return out


_PARSERS = {
    "seed": int,
    "periods": int,
    "txns_per_period": int,
    "score_support": _int_list,
    "base_fraud_rate_by_score": _score_rates,
    "feedback_gain": float,
    "lead_time": int,
    "maturity_delay_weights": _float_list,
    "drift": float,
    "fraud_volatility": float,
    "fraud_reversion": float,
    "spike_period": int,
    "spike_magnitude": float,
    "feedback_window": int,
    "reference_rate": float,
    "epoch": float,
    "period_length": float,
}


def config_from_mapping(values: dict[str, str], base: GeneratorConfig | None = None) -> GeneratorConfig:
    """Build a config from string values; keys not for the generator are ignored."""
    updates = {}
    for key, raw in values.items():
        if key in _PARSERS:
            try:
                updates[key] = _PARSERS[key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    if "lead_time" in updates and "maturity_delay_weights" not in updates:
        updates["maturity_delay_weights"] = _default_delay_weights(updates["lead_time"])
    return replace(base or GeneratorConfig(), **updates)


def load_config(path) -> GeneratorConfig:
    return config_from_mapping(parse_kv(Path(path).read_text(encoding="utf-8")))
