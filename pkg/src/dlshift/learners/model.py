"""The fit/predict contract over the five learning cores."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InsufficientDataError, ParameterError
from . import boosting, elman, forest, linear, mlp
from .base import FeatureLayout, FeatureRow, Kind, TrainingMatrix, check_layout

log = logging.getLogger(__name__)

CORES = {
    Kind.LR: linear,
    Kind.ANN: mlp,
    Kind.RF: forest,
    Kind.GB: boosting,
    Kind.RNN: elman,
}


@dataclass
class LearnerModel:
    kind: Kind
    params: dict[str, np.ndarray]
    hyperparameters: dict
    layout: FeatureLayout
    meta: dict = field(default_factory=dict)

    @property
    def core(self):
        return CORES[self.kind]

    def predict_matrix(self, X, layout: FeatureLayout | None = None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        check_layout(self.layout, layout, X.shape[1])
        return np.asarray(self.core.predict(self.params, self.hyperparameters, X, self.layout), dtype=float)


def predict(model: LearnerModel, row) -> float:
    """Raw (unclamped) prediction for one row.

    ``row`` is a :class:`FeatureRow` (its layout must equal the model's) or a
    plain vector of the right length.
    """
    if isinstance(row, FeatureRow):
        return float(model.predict_matrix(row.flat[None, :], row.layout)[0])
    return float(model.predict_matrix(np.asarray(row, dtype=float)[None, :])[0])


def derive_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([int(seed), *[int(t) for t in tags]]).generate_state(1)[0])


def canonical_order(data: TrainingMatrix) -> np.ndarray:
    """Row order by (period, features..., response); makes fitting independent of input order."""
    keys = [data.y] + [data.X[:, j] for j in range(data.X.shape[1] - 1, -1, -1)] + [data.periods]
    return np.lexsort(keys)


def forward_chain_folds(periods: np.ndarray, folds: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Train on earlier blocks, validate on the next one.

    ``periods`` must be sorted. Blocks are groups of whole periods when
    there are at least ``folds + 1`` distinct periods, otherwise contiguous
    row chunks (validation rows then never precede training rows in time).
    """
    n = len(periods)
    uniq = np.unique(periods)
    if len(uniq) >= folds + 1:
        groups = np.array_split(uniq, folds + 1)
        blocks = [np.flatnonzero(np.isin(periods, g)) for g in groups]
    else:
        blocks = np.array_split(np.arange(n), folds + 1)
    out = []
    for k in range(folds):
        train = np.concatenate(blocks[: k + 1])
        out.append((train, blocks[k + 1]))
    return out


def _default_grid(kind: Kind) -> list[dict]:
    return [dict(hp) for hp in CORES[kind].DEFAULT_GRID]


def cross_validate(kind: Kind, data: TrainingMatrix, folds, grid, seed, threads=1):
    """Mean validation curves per grid point; returns (best hp, table of scores)."""
    core = CORES[kind]
    per_point: list[list[np.ndarray]] = [[] for _ in grid]
    for k, (tr, va) in enumerate(folds):
        fold_seed = derive_seed(seed, 1, k)
        Xtr, ytr, Xva, yva = data.X[tr], data.y[tr], data.X[va], data.y[va]
        if hasattr(core, "fold_curves"):
            curves = core.fold_curves(Xtr, ytr, Xva, yva, grid, fold_seed, data.layout, threads)
        else:
            curves = []
            for hp in grid:
                params = core.train(Xtr, ytr, hp, fold_seed, data.layout, threads)
                err = core.predict(params, hp, Xva, data.layout) - yva
                curves.append(np.array([float(err @ err) / len(err)]))
        for g, c in enumerate(curves):
            per_point[g].append(np.asarray(c, dtype=float))
    table = []
    best = None
    for g, curves in enumerate(per_point):
        length = max(len(c) for c in curves)
        padded = np.array([np.pad(c, (0, length - len(c)), mode="edge") for c in curves])
        mean_curve = padded.mean(axis=0)
        idx = int(np.argmin(mean_curve))
        score = float(mean_curve[idx])
        hp = core.finalize(grid[g], idx) if hasattr(core, "finalize") else dict(grid[g])
        table.append({"hyperparameters": hp, "cv_mse": score})
        if best is None or score < best[0]:
            best = (score, hp)
    return best[1], table


def fit(
    kind,
    data: TrainingMatrix,
    cv_folds: int = 3,
    seed: int = 0,
    grid: Sequence[dict] | None = None,
    threads: int = 1,
    meta: dict | None = None,
) -> LearnerModel:
    """Tune hyperparameters by forward-chaining CV, then refit on all rows."""
    kind = Kind.parse(kind)
    if cv_folds < 2:
        raise ParameterError("cv_folds must be >= 2")
    if len(data) < 10 * cv_folds:
        raise InsufficientDataError(f"{len(data)} rows is fewer than 10 x {cv_folds} folds")
    if kind is Kind.RNN and data.layout.trajectory is None:
        raise ParameterError("RNN needs a layout with a trajectory span")
    order = canonical_order(data)
    data = TrainingMatrix(data.X[order], data.y[order], data.layout, data.periods[order])
    grid = [dict(hp) for hp in grid] if grid is not None else _default_grid(kind)
    if not grid:
        raise ParameterError("empty hyperparameter grid")
    if kind is Kind.LR:
        top = max(float(hp["penalty"]) for hp in grid)
        grid = [dict(hp, fallback_penalty=top) for hp in grid]

    core = CORES[kind]
    if len(grid) == 1 and not hasattr(core, "finalize"):
        hp, table = dict(grid[0]), []
    else:
        folds = forward_chain_folds(data.periods, cv_folds)
        hp, table = cross_validate(kind, data, folds, grid, seed, threads)
    params = core.train(data.X, data.y, hp, derive_seed(seed, 2), data.layout, threads)
    params = {k: np.asarray(v) for k, v in params.items()}
    log.debug("fit %s on %d rows: %s", kind.value, len(data), hp)
    model_meta = dict(meta or {})
    model_meta["cv"] = table
    return LearnerModel(kind, params, hp, data.layout, model_meta)
