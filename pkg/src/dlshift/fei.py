"""Future environment inference.

Two stages. Module I holds CEI models for ``g2`` and ``g4`` of the current
period; together with the current period's action sequence they give the
estimated chargeback rate ``rho_hat``. Module II maps the shorter mature
trajectory of ``g1`` (length ``D - l``) and a chargeback rate to ``g1`` of
period ``now + l``. Module II trains on the true rate of mature periods
and predicts from ``rho_hat``.
"""
from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import cei
from .cei import CeiConfig, as_history, check_fingerprint, clamp01
from .errors import FormatError, InsufficientHistoryError, ParameterError
from .gfunc import ActionSequence, EnvironmentHistory, estimate_rho, forward_fill
from .learners import FeatureLayout, LearnerModel, TrainingMatrix, fit
from .learners import modelio as ser

log = logging.getLogger(__name__)


@dataclass
class FeiConfig(CeiConfig):
    module1_g1: bool = False  # also train a module-I model for g1

    def validate(self) -> None:
        super().validate()
        if not self.D > self.l >= 1:
            raise ParameterError(f"need D > l >= 1, got D={self.D}, l={self.l}")

    @property
    def short_length(self) -> int:
        return self.D - self.l

    def module1(self, target: int) -> CeiConfig:
        return CeiConfig(
            L=self.L, D=self.D, l=self.l, target=target, kind=self.kind, scores=self.scores,
            cv_folds=self.cv_folds, seed=self.seed, grid=self.grid, threads=self.threads,
        )


@dataclass
class FeiModel:
    module1_g2: LearnerModel
    module1_g4: LearnerModel
    module2: LearnerModel
    module1_g1: LearnerModel | None = None

    def fingerprints(self) -> list[dict]:
        ms = [self.module1_g2, self.module1_g4, self.module2, self.module1_g1]
        return [m.meta.get("fingerprint") for m in ms if m is not None]


def layout_II(cfg: FeiConfig) -> FeatureLayout:
    k = cfg.short_length
    names = ["score", "target_period"] + [f"g1_lag{cfg.l + k - i}" for i in range(k)] + ["rho"]
    return FeatureLayout(tuple(names), trajectory=(2, 2 + k))


def first_row_period_II(cfg: FeiConfig) -> int:
    return cfg.L + cfg.D - cfg.l - 1


def _short_traj(history: EnvironmentHistory, t: int, cfg: FeiConfig) -> np.ndarray:
    g = forward_fill(history.g(t)[:, :, 0])
    lo, hi = t - cfg.L - cfg.D + cfg.l + 1, t - cfg.L
    return g[lo : hi + 1, :].T


def _assemble(scores, period_feature: int, traj: np.ndarray, rate: float):
    S, k = traj.shape
    X = np.empty((S, k + 3))
    X[:, 0] = scores
    X[:, 1] = period_feature
    X[:, 2 : 2 + k] = traj
    X[:, -1] = rate
    return X, ~np.isnan(X).any(axis=1)


def build_training_II(stream, now: int, cfg: FeiConfig) -> TrainingMatrix:
    """Rows ``(s, t)`` with ``t + l <= now - L``; response ``g1`` of ``t + l``."""
    history = as_history(stream, cfg.scores)
    scores = cei._scores(history, cfg)
    t0, t1 = first_row_period_II(cfg), now - cfg.L - cfg.l
    if t1 < t0:
        raise InsufficientHistoryError(
            f"no module II rows at now={now}; first usable period is now={t0 + cfg.L + cfg.l}"
        )
    truth = history.g(now)[:, :, 0]
    full = history.partial_rate(now)
    blocks, ys, periods, keys = [], [], [], []
    for t in range(t0, t1 + 1):
        X, ok = _assemble(scores, t + cfg.l, _short_traj(history, t, cfg), float(full[t]))
        y = truth[t + cfg.l]
        ok &= ~np.isnan(y)
        blocks.append(X[ok])
        ys.append(y[ok])
        periods.append(np.full(int(ok.sum()), t))
        keys.extend((int(s), t) for s, k in zip(scores, ok) if k)
    return TrainingMatrix(np.vstack(blocks), np.concatenate(ys), layout_II(cfg), np.concatenate(periods), keys)


def train_fei(stream, now: int, cfg: FeiConfig) -> FeiModel:
    history = as_history(stream, cfg.scores)
    fp = cfg.fingerprint(history.scores)
    m2 = cei.train(history, now, cfg.module1(2))
    m4 = cei.train(history, now, cfg.module1(4))
    m1 = cei.train(history, now, cfg.module1(1)) if cfg.module1_g1 else None
    data = build_training_II(history, now, cfg)
    meta = {"framework": "FEI-II", "target": 1, "now": int(now), "fingerprint": fp}
    module2 = fit(cfg.kind, data, cfg.cv_folds, cfg.seed, cfg.grid, cfg.threads, meta=meta)
    return FeiModel(m2, m4, module2, m1)


def _known(values: dict) -> dict:
    return {s: v for s, v in values.items() if v is not None}


def future_features(history: EnvironmentHistory, now: int, rho_hat: float, cfg: FeiConfig):
    if now - cfg.L - cfg.D + cfg.l + 1 < 0:
        raise InsufficientHistoryError(f"not enough history to predict from now={now}")
    return _assemble(history.scores, now + cfg.l, _short_traj(history, now, cfg), rho_hat)


def predict_future(
    model: FeiModel,
    stream,
    now: int,
    seq: ActionSequence,
    cfg: FeiConfig,
    g2_hat: dict | None = None,
    g4_hat: dict | None = None,
) -> dict[int, float | None]:
    """``score -> g1_hat`` for period ``now + l``.

    ``g2_hat`` / ``g4_hat`` replace the module-I predictions when given,
    which lets callers inject exact values.
    """
    history = as_history(stream, cfg.scores)
    scores = cei._scores(history, cfg)
    fp = cfg.fingerprint(scores)
    for m in (model.module1_g2, model.module1_g4, model.module2):
        check_fingerprint(m, fp)
    if g2_hat is None:
        g2_hat = cei.predict_current(model.module1_g2, history, now, cfg.module1(2))
    if g4_hat is None:
        g4_hat = cei.predict_current(model.module1_g4, history, now, cfg.module1(4))
    rho_hat = estimate_rho(seq, _known(g2_hat), _known(g4_hat))
    X, ok = future_features(history, now, rho_hat, cfg)
    out: dict[int, float | None] = {int(s): None for s in scores}
    if ok.any():
        raw = model.module2.predict_matrix(X[ok], model.module2.layout)
        for s, v in zip(np.asarray(scores)[ok], raw):
            out[int(s)] = clamp01(float(v))
    return out


# FEI bundle: b"DLSF" | u16 version | u8 count | (u32 length | model blob)* | u32 CRC-32
BUNDLE_MAGIC = b"DLSF"
BUNDLE_VERSION = 1


def serialize_fei(model: FeiModel) -> bytes:
    parts = [model.module1_g2, model.module1_g4, model.module2]
    if model.module1_g1 is not None:
        parts.append(model.module1_g1)
    body = bytearray(struct.pack("<4sHB", BUNDLE_MAGIC, BUNDLE_VERSION, len(parts)))
    for m in parts:
        blob = ser.serialize(m)
        body += struct.pack("<I", len(blob)) + blob
    return bytes(body) + struct.pack("<I", zlib.crc32(body))


def deserialize_fei(data: bytes) -> FeiModel:
    if len(data) < 11 or data[:4] != BUNDLE_MAGIC:
        raise FormatError("not an FEI bundle (bad magic bytes)")
    _, version, count = struct.unpack_from("<4sHB", data, 0)
    if version != BUNDLE_VERSION:
        raise FormatError(f"unsupported bundle version {version}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise FormatError("checksum mismatch; bundle is corrupted")
    if count not in (3, 4):
        raise FormatError(f"bundle holds {count} models, expected 3 or 4")
    off, parts = 7, []
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, off)
        parts.append(ser.deserialize(data[off + 4 : off + 4 + n]))
        off += 4 + n
    if off != len(data) - 4:
        raise FormatError("trailing bytes in bundle")
    return FeiModel(parts[0], parts[1], parts[2], parts[3] if count == 4 else None)
