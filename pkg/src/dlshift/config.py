"""Run configuration: flat ``key = value`` files with command-line overrides.

Keys (all optional):

===============  =======================================================
L                maturity lead time in periods (12)
D                trajectory length (4)
l                calibration lag / FEI horizon (2)
period_length    seconds per period (604800)
epoch            UTC seconds of the start of period 0 (2024-01-01)
scores           comma-separated score support (50,100,...,1000)
kind             learner: LR, ANN, RF, GB or RNN (LR)
target           g1 .. g4 for CEI (g1)
cv_folds         forward-chaining folds (3)
seed             master seed (42)
threads          worker threads (1)
grid_<KIND>      comma-separated values for the kind's tuned parameter:
                 LR penalty, ANN hidden, RF max_depth (-1 = unlimited),
                 GB shrinkage, RNN hidden
===============  =======================================================

Generator keys (see :mod:`dlshift.synthgen`) may share the same file.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .cei import CeiConfig
from .errors import ConfigError
from .fei import FeiConfig
from .learners import Kind
from .learners import boosting, elman, forest, linear, mlp
from .stream import DEFAULT_EPOCH, WEEK, PeriodGrid
from .synthgen import DEFAULT_SCORES, parse_kv

GRID_PARAM = {"LR": "penalty", "ANN": "hidden", "RF": "max_depth", "GB": "shrinkage", "RNN": "hidden"}
_GRID_TYPE = {"penalty": float, "hidden": int, "max_depth": int, "shrinkage": float}
_TEMPLATES = {"LR": linear, "ANN": mlp, "RF": forest, "GB": boosting, "RNN": elman}


@dataclass
class RunConfig:
    L: int = 12
    D: int = 4
    l: int = 2
    period_length: float = WEEK
    epoch: float = DEFAULT_EPOCH
    scores: tuple[int, ...] = DEFAULT_SCORES
    kind: str = "LR"
    target: int = 1
    cv_folds: int = 3
    seed: int = 42
    threads: int = 1
    grids: dict = field(default_factory=dict)  # kind -> list of hyperparameter dicts

    @property
    def grid(self) -> PeriodGrid:
        return PeriodGrid(self.epoch, self.period_length)

    def learner_grid(self, kind: str | None = None):
        return self.grids.get(Kind.parse(kind or self.kind).value)

    def cei(self, kind: str | None = None, target: int | None = None) -> CeiConfig:
        k = Kind.parse(kind or self.kind).value
        return CeiConfig(
            L=self.L, D=self.D, l=self.l, target=target or self.target, kind=k, scores=self.scores,
            cv_folds=self.cv_folds, seed=self.seed, grid=self.learner_grid(k), threads=self.threads,
        )

    def fei(self, kind: str | None = None) -> FeiConfig:
        k = Kind.parse(kind or self.kind).value
        return FeiConfig(
            L=self.L, D=self.D, l=self.l, target=1, kind=k, scores=self.scores,
            cv_folds=self.cv_folds, seed=self.seed, grid=self.learner_grid(k), threads=self.threads,
        )


def _parse_target(v: str) -> int:
    v = v.strip().lower()
    return int(v[1:] if v.startswith("g") else v)


def _parse_grid(kind: str, raw: str) -> list[dict]:
    name = GRID_PARAM[kind]
    base = dict(_TEMPLATES[kind].DEFAULT_GRID[0])
    out = []
    for item in raw.split(","):
        if item.strip():
            hp = dict(base)
            hp[name] = _GRID_TYPE[name](item)
            out.append(hp)
    if not out:
        raise ConfigError(f"empty grid for {kind}")
    return out


_SCALARS = {
    "L": int, "D": int, "l": int, "period_length": float, "epoch": float, "cv_folds": int,
    "seed": int, "threads": int, "target": _parse_target,
    "kind": lambda v: Kind.parse(v).value,
    "scores": lambda v: tuple(int(x) for x in v.split(",") if x.strip()),
}


def run_config_from_mapping(values: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    cfg = replace(base or RunConfig())
    cfg.grids = dict(cfg.grids)
    for key, raw in values.items():
        try:
            if key in _SCALARS:
                setattr(cfg, key, _SCALARS[key](raw))
            elif key.startswith("grid_"):
                kind = Kind.parse(key[5:]).value
                cfg.grids[kind] = _parse_grid(kind, raw)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    try:
        cfg.cei()
        cfg.fei() if cfg.D > cfg.l else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.period_length <= 0:
        raise ConfigError("period_length must be positive")
    return cfg


def load_run_config(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    values = parse_kv(Path(path).read_text(encoding="utf-8")) if path else {}
    values.update(overrides or {})
    return run_config_from_mapping(values)
