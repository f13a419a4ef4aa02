"""Planted environments with known generating laws.

A :class:`PlantedHistory` is built from final g-values, true chargeback
rates and one action sequence per period. A label matures linearly over
``L`` periods, so the partial rate of period ``p`` seen at ``t`` is
``rho[p] * min(1, (t - p) / L)``. g-values of a started period are
reported at their final values; the pipelines only consume mature ones.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gfunc import Action, ActionSequence, EnvironmentHistory, estimate_rho


class PlantedHistory(EnvironmentHistory):
    def __init__(self, g: np.ndarray, rho: np.ndarray, scores, lead_time: int, seqs=None, horizon=None):
        self._g = np.asarray(g, dtype=float)
        self._rho = np.asarray(rho, dtype=float)
        self.scores = tuple(int(s) for s in scores)
        self.n_periods = self._g.shape[0]
        self.lead_time = lead_time
        self.horizon = horizon if horizon is not None else self.n_periods + lead_time
        self._seqs = seqs

    def g(self, as_of: int) -> np.ndarray:
        out = self._g.copy()
        out[max(as_of, 0) :] = np.nan
        return out

    def partial_rate(self, as_of: int) -> np.ndarray:
        p = np.arange(self.n_periods)
        frac = np.clip((as_of - p) / self.lead_time, 0.0, 1.0)
        out = self._rho * frac
        out[p >= as_of] = np.nan
        return out

    def actions(self, period: int) -> ActionSequence:
        if self._seqs is None:
            return super().actions(period)
        return self._seqs[period]


@dataclass
class PlantedSpec:
    periods: int = 40
    scores: tuple[int, ...] = tuple(range(50, 1001, 50))
    L: int = 12
    D: int = 4
    l: int = 2
    seed: int = 0
    actions_per_period: int = 200


def _random_seq(rng, scores, m) -> ActionSequence:
    acts = rng.choice([Action.APP, Action.REV, Action.REJ], size=m, p=[0.6, 0.3, 0.1])
    acts[0] = Action.APP
    return ActionSequence(list(acts), [int(s) for s in rng.choice(scores, size=m)])


def _mean_window(a, lo, hi):
    return a[lo : hi + 1].mean(axis=0)


def planted_world(spec: PlantedSpec = PlantedSpec(), law: str = "cei") -> PlantedHistory:
    """Noiseless linear world.

    ``law="cei"``: ``g1[t] = 0.5*mean(g1[t-L-D+1..t-L]) + 0.4*(1 - rho_partial[t-l] seen at t)``.
    ``law="fei"``: ``g1[t+l] = 0.8*mean(g1[t-L-D+l+1..t-L]) + 0.2*(1 - rho[t])``.
    ``g2`` and ``g4`` follow CEI-type laws in both cases and the true rate
    of every period is ``estimate_rho`` of its action sequence.
    """
    rng = np.random.default_rng(spec.seed)
    P, S, L, D, l = spec.periods, len(spec.scores), spec.L, spec.D, spec.l
    q = np.linspace(0, 1, S)
    g = np.full((P, S, 5), np.nan)
    rho = np.zeros(P)
    seqs = [_random_seq(rng, spec.scores, spec.actions_per_period) for _ in range(P)]
    frac_l = min(1.0, l / L)
    start = L + D - 1
    for t in range(P):
        if t < start:
            g[t, :, 0] = 0.75 - 0.2 * q + rng.uniform(-0.05, 0.05, S)
            g[t, :, 1] = 0.01 + 0.04 * q + rng.uniform(0, 0.01, S)
            g[t, :, 3] = 0.02 + 0.06 * q + rng.uniform(0, 0.01, S)
        else:
            lo, hi = t - L - D + 1, t - L
            seen = rho[t - l] * frac_l
            g[t, :, 1] = 0.5 * _mean_window(g[:, :, 1], lo, hi) + 0.01 + 0.3 * seen
            g[t, :, 3] = 0.5 * _mean_window(g[:, :, 3], lo, hi) + 0.02 + 0.3 * seen
            if law == "cei":
                g[t, :, 0] = 0.5 * _mean_window(g[:, :, 0], lo, hi) + 0.4 * (1 - seen)
            else:
                u = t - l  # decision period whose information drives g1[t]
                g[t, :, 0] = 0.8 * _mean_window(g[:, :, 0], u - L - D + l + 1, u - L) + 0.2 * (1 - rho[u])
        g[t, :, 4] = g[t, :, 0] + g[t, :, 1]
        g[t, :, 2] = 0.9 - g[t, :, 3]
        g2 = dict(zip(spec.scores, g[t, :, 1]))
        g4 = dict(zip(spec.scores, g[t, :, 3]))
        rho[t] = estimate_rho(seqs[t], g2, g4)
    return PlantedHistory(g, rho, spec.scores, L, seqs)


def constant_world(value: float = 0.7, periods: int = 40, scores=tuple(range(50, 1001, 50)), L: int = 12,
                   rho: float = 0.03) -> PlantedHistory:
    g = np.full((periods, len(scores), 5), value)
    seqs = [ActionSequence([Action.APP] * len(scores), list(scores)) for _ in range(periods)]
    return PlantedHistory(g, np.full(periods, rho), scores, L, seqs)
