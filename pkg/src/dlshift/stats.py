"""Rank correlation tests and calibration-lag selection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .errors import InsufficientDataError, ParameterError, UndefinedStatisticError

MIN_LAG_OVERLAP = 8


@dataclass(frozen=True)
class PairedSeries:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ParameterError("x and y must be 1-d with equal length")
        if len(x) < 3:
            raise ParameterError("need at least 3 pairs")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ParameterError("series contain non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class LagTestReport:
    lag: int
    n: int
    kendall_tau: float
    kendall_p: float
    spearman_rho: float
    spearman_p: float


def _as_series(series, y=None) -> PairedSeries:
    if y is not None:
        return PairedSeries(series, y)
    return series if isinstance(series, PairedSeries) else PairedSeries(*series)


def _tie_sums(v: np.ndarray) -> tuple[float, float, float]:
    _, counts = np.unique(v, return_counts=True)
    t = counts[counts > 1].astype(float)
    return (
        float(np.sum(t * (t - 1))),
        float(np.sum(t * (t - 1) * (t - 2))),
        float(np.sum(t * (t - 1) * (2 * t + 5))),
    )


def kendall(series, y=None) -> tuple[float, float]:
    """Kendall tau-b and a two-sided p-value from the tie-corrected normal approximation."""
    s = _as_series(series, y)
    x, y = s.x, s.y
    n = len(x)
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, k=1)
    prod = (dx * dy)[iu]
    score = float(prod.sum())  # concordant minus discordant
    n0 = n * (n - 1) / 2.0
    tx2, tx3, tx5 = _tie_sums(x)
    ty2, ty3, ty5 = _tie_sums(y)
    n1 = tx2 / 2.0
    n2 = ty2 / 2.0
    if n0 == n1 or n0 == n2:
        raise UndefinedStatisticError("all values tied in x or y")
    tau = score / math.sqrt((n0 - n1) * (n0 - n2))
    tau = min(1.0, max(-1.0, tau))
    var = (
        (n * (n - 1) * (2 * n + 5) - tx5 - ty5) / 18.0
        + tx2 * ty2 / (2.0 * n * (n - 1))
        + tx3 * ty3 / (9.0 * n * (n - 1) * (n - 2))
    )
    z = score / math.sqrt(var)
    p = float(special.erfc(abs(z) / math.sqrt(2.0)))
    return tau, min(1.0, max(0.0, p))


def spearman(series, y=None) -> tuple[float, float]:
    """Spearman rho (Pearson on average ranks) with a t-approximation p-value, n-2 df."""
    s = _as_series(series, y)
    rx = rankdata(s.x, method="average")
    ry = rankdata(s.y, method="average")
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    sxx = float(np.dot(rx, rx))
    syy = float(np.dot(ry, ry))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedStatisticError("zero rank variance")
    rho = float(np.dot(rx, ry)) / math.sqrt(sxx * syy)
    rho = min(1.0, max(-1.0, rho))
    n = len(s)
    df = n - 2
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * math.sqrt(df / ((1.0 - rho) * (1.0 + rho)))
    p = float(2.0 * special.stdtr(df, -abs(t)))
    return rho, min(1.0, max(0.0, p))


def lag_pairs(g_series: Mapping[int, float], rate_series: Mapping[int, float], lag: int):
    periods = sorted(t for t in g_series if (t - lag) in rate_series)
    x = [g_series[t] for t in periods]
    y = [rate_series[t - lag] for t in periods]
    return np.asarray(x, float), np.asarray(y, float)


def lag_report(x, y, lag: int) -> LagTestReport:
    tau, kp = kendall(x, y)
    rho, sp = spearman(x, y)
    return LagTestReport(lag, len(x), tau, kp, rho, sp)


def select_lag(
    g_series: Mapping[int, float],
    rate_series: Mapping[int, float],
    candidate_lags: Sequence[int],
) -> tuple[int, list[LagTestReport]]:
    """Pick the lag whose worse p-value (Kendall or Spearman) is smallest.

    Lags with fewer than 8 overlapping periods, or with an undefined
    statistic, are skipped. Ties go to the smaller lag.
    """
    reports = []
    for lag in sorted(set(candidate_lags)):
        x, y = lag_pairs(g_series, rate_series, lag)
        if len(x) < MIN_LAG_OVERLAP:
            continue
        try:
            reports.append(lag_report(x, y, lag))
        except UndefinedStatisticError:
            continue
    if not reports:
        raise InsufficientDataError(
            f"no candidate lag has {MIN_LAG_OVERLAP} overlapping periods with defined statistics"
        )
    best = min(reports, key=lambda r: (max(r.kendall_p, r.spearman_p), r.lag))
    return best.lag, reports


def format_lag_table(reports: Sequence[LagTestReport]) -> str:
    header = f"{'lag':>4} {'kendall_tau':>12} {'kendall_p':>11} {'spearman_rho':>13} {'spearman_p':>11}"
    lines = [header]
    for r in reports:
        lines.append(
            f"{r.lag:>4d} {r.kendall_tau:>12.3f} {r.kendall_p:>11.3e} {r.spearman_rho:>13.3f} {r.spearman_p:>11.3e}"
        )
    return "\n".join(lines) + "\n"
