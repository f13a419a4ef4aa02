"""Training data containers shared by the learning cores."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, ParameterError


class Kind(str, enum.Enum):
    LR = "LR"
    ANN = "ANN"
    RF = "RF"
    GB = "GB"
    RNN = "RNN"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, Kind):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ParameterError(f"unknown learner kind {value!r}; expected one of LR, ANN, RF, GB, RNN") from None


@dataclass(frozen=True)
class FeatureLayout:
    """Column names plus the half-open column span holding the trajectory.

    The trajectory span is read as ``steps`` consecutive blocks of
    ``step_width`` columns each, oldest first.
    """

    names: tuple[str, ...]
    trajectory: tuple[int, int] | None = None
    step_width: int = 1

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if self.trajectory is not None:
            a, b = self.trajectory
            if not (0 <= a < b <= len(self.names)) or (b - a) % self.step_width:
                raise ParameterError(f"bad trajectory span {self.trajectory} for {len(self.names)} columns")
            object.__setattr__(self, "trajectory", (int(a), int(b)))

    @property
    def n_features(self) -> int:
        return len(self.names)

    @property
    def steps(self) -> int:
        if self.trajectory is None:
            return 0
        return (self.trajectory[1] - self.trajectory[0]) // self.step_width

    @property
    def static_indices(self) -> np.ndarray:
        idx = np.arange(self.n_features)
        if self.trajectory is None:
            return idx
        a, b = self.trajectory
        return idx[(idx < a) | (idx >= b)]

    def to_dict(self) -> dict:
        return {"names": list(self.names), "trajectory": self.trajectory, "step_width": self.step_width}

    @classmethod
    def from_dict(cls, d) -> "FeatureLayout":
        traj = d.get("trajectory")
        return cls(tuple(d["names"]), tuple(traj) if traj is not None else None, int(d.get("step_width", 1)))

    @classmethod
    def plain(cls, n: int) -> "FeatureLayout":
        return cls(tuple(f"x{i}" for i in range(n)))


@dataclass(frozen=True)
class FeatureRow:
    flat: np.ndarray
    layout: FeatureLayout

    @property
    def sequence_view(self) -> np.ndarray | None:
        if self.layout.trajectory is None:
            return None
        a, b = self.layout.trajectory
        return np.asarray(self.flat[a:b]).reshape(self.layout.steps, self.layout.step_width)


@dataclass
class TrainingMatrix:
    """Feature rows, responses and the period each row belongs to.

    ``periods`` drives forward-chaining cross-validation; it defaults to the
    row number, i.e. rows are taken to be in time order.
    """

    X: np.ndarray
    y: np.ndarray
    layout: FeatureLayout
    periods: np.ndarray | None = None
    keys: list = field(default_factory=list)  # optional (score, period) per row

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64).ravel()
        if self.X.ndim != 2:
            raise ParameterError("X must be 2-d")
        if self.X.shape[0] != self.y.shape[0]:
            raise ParameterError("X and y have different row counts")
        if self.X.shape[1] != self.layout.n_features:
            raise ParameterError("X column count does not match the layout")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ParameterError("training matrix contains Missing or non-finite values")
        if self.periods is None:
            self.periods = np.arange(len(self.y), dtype=np.int64)
        self.periods = np.asarray(self.periods, dtype=np.int64)
        if self.periods.shape != self.y.shape:
            raise ParameterError("periods must have one entry per row")

    def __len__(self) -> int:
        return len(self.y)

    def rows(self) -> list[FeatureRow]:
        return [FeatureRow(x, self.layout) for x in self.X]


@dataclass
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Scaler":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 1e-12 * np.maximum(1.0, np.abs(mean)), scale, 1.0)
        return cls(mean, scale)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


def check_layout(expected: FeatureLayout, got: FeatureLayout | None, n_cols: int) -> None:
    if got is not None and got != expected:
        raise ContractError(f"feature layout mismatch: model expects {expected.names}, got {got.names}")
    if n_cols != expected.n_features:
        raise ContractError(f"model expects {expected.n_features} features, got {n_cols}")
