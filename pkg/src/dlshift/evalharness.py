"""Walk-forward evaluation and training-time benchmarks."""
from __future__ import annotations

import csv
import json
import logging
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cei, fei
from .cei import CeiConfig, as_history
from .errors import InsufficientHistoryError, ParameterError
from .fei import FeiConfig
from .gfunc import forward_fill
from .learners import Kind, fit

log = logging.getLogger(__name__)

PERSISTENCE = "persistence"


def framework_of(cfg: CeiConfig) -> str:
    return "FEI" if isinstance(cfg, FeiConfig) else "CEI"


def target_of(cfg: CeiConfig) -> int:
    return 1 if isinstance(cfg, FeiConfig) else cfg.target


@dataclass
class CellStats:
    mse: float
    error_std: float
    n_predictions: int

    @classmethod
    def from_errors(cls, errors: Sequence[float]) -> "CellStats":
        e = np.asarray(errors, dtype=float)
        if e.size == 0:
            return cls(math.nan, math.nan, 0)
        std = float(np.std(e, ddof=1)) if e.size > 1 else 0.0
        return cls(float(np.mean(e * e)), std, int(e.size))


@dataclass
class EvalReport:
    """Pooled MSE and error std per (framework, learner, target); persistence rows use learner "persistence"."""

    start: int
    weeks: int
    cells: dict = field(default_factory=dict)  # (framework, learner, target) -> CellStats
    records: list = field(default_factory=list)

    def baseline(self, framework: str, target: int) -> CellStats:
        return self.cells[(framework, PERSISTENCE, target)]

    def best(self, framework: str, target: int) -> tuple[str, CellStats]:
        cands = [(k[1], v) for k, v in self.cells.items() if k[0] == framework and k[2] == target and k[1] != PERSISTENCE]
        return min(cands, key=lambda kv: kv[1].mse)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["framework", "learner", "target", "mse", "error_std", "n_predictions"])
            for (fw, kind, j), c in sorted(self.cells.items()):
                w.writerow([fw, kind, f"g{j}", repr(c.mse), repr(c.error_std), c.n_predictions])

    def write_log(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")

    def format_table(self) -> str:
        lines = [f"walk-forward weeks {self.start}..{self.start + self.weeks - 1}"]
        for fw in sorted({k[0] for k in self.cells}):
            for j in sorted({k[2] for k in self.cells if k[0] == fw}):
                lines.append(f"{fw} g{j}")
                lines.append(f"  {'learner':<12}{'MSE':>14}{'error std':>14}{'n':>7}")
                keys = sorted((k for k in self.cells if k[0] == fw and k[2] == j), key=lambda k: (k[1] == PERSISTENCE, k[1]))
                for k in keys:
                    c = self.cells[k]
                    lines.append(f"  {k[1]:<12}{c.mse:>14.6e}{c.error_std:>14.6e}{c.n_predictions:>7d}")
        return "\n".join(lines) + "\n"


def default_start(n_periods: int, weeks: int, cfgs) -> int:
    lag = max((c.l for c in cfgs if isinstance(c, FeiConfig)), default=0)
    return n_periods - weeks - lag


def walk_forward(stream, start: int | None, weeks: int, cfgs: Sequence[CeiConfig], scores=None) -> EvalReport:
    """Retrain every configuration at each test week and score against final truths.

    At week ``w`` models see only what is observable at the start of ``w``.
    CEI predicts ``g`` of ``w``; FEI predicts ``g1`` of ``w + l``. The
    persistence baseline predicts ``g`` of the target period by the latest
    mature value ``g`` of ``w - L`` (carried forward when Missing).
    """
    if not cfgs:
        raise ParameterError("no model configurations to evaluate")
    history = as_history(stream, scores)
    if start is None:
        start = default_start(history.n_periods, weeks, cfgs)
    final = history.g_final()
    for c in cfgs:
        ahead = c.l if isinstance(c, FeiConfig) else 0
        last = start + weeks - 1 + ahead
        if last >= history.n_periods or not history.is_mature(last, c.L):
            raise InsufficientHistoryError(
                f"truth for period {last} is not mature in this stream (periods={history.n_periods}, "
                f"labels observed through {history.horizon})"
            )
    errors: dict[tuple, list] = {}
    records = []
    baseline_done: set[tuple] = set()
    for w in range(start, start + weeks):
        for c in cfgs:
            fw, j = framework_of(c), target_of(c)
            tp = w + (c.l if fw == "FEI" else 0)
            if fw == "FEI":
                model = fei.train_fei(history, w, c)
                pred = fei.predict_future(model, history, w, history.actions(w), c)
            else:
                model = cei.train(history, w, c)
                pred = cei.predict_current(model, history, w, c)
            pers = None
            if (fw, j, w) not in baseline_done:
                baseline_done.add((fw, j, w))
                pers = forward_fill(history.g(w)[:, :, j - 1])[w - c.L]
            for si, s in enumerate(history.scores):
                truth = final[tp, si, j - 1]
                if math.isnan(truth):
                    continue
                rows = [(c.kind, pred[s])]
                if pers is not None:
                    rows.append((PERSISTENCE, None if math.isnan(pers[si]) else float(pers[si])))
                for learner, p in rows:
                    if p is None:
                        log.warning("no %s prediction for score %s at week %d", learner, s, w)
                        continue
                    errors.setdefault((fw, learner, j), []).append(p - truth)
                    records.append({
                        "framework": fw, "learner": learner, "target": j, "week": w,
                        "target_period": tp, "score": int(s), "prediction": p, "truth": float(truth),
                    })
    report = EvalReport(start, weeks, records=records)
    for key, errs in errors.items():
        report.cells[key] = CellStats.from_errors(errs)
    return report


def mse_from_log(records, framework: str, learner: str, target: int) -> float:
    e = [r["prediction"] - r["truth"] for r in records
         if r["framework"] == framework and r["learner"] == learner and r["target"] == target]
    return float(np.mean(np.square(e)))


# ---------------------------------------------------------------------------
# timing

MODULES = ("CEI/FEI-I", "FEI-II")
REFERENCE_ORDER = "LR < ANN < {RF, GB} < RNN"


@dataclass
class TimingStats:
    avg_seconds: float
    std_seconds: float
    samples: int
    times: list = field(default_factory=list)


@dataclass
class TimingReport:
    cells: dict = field(default_factory=dict)  # (module, kind) -> TimingStats

    def ordering(self, module: str) -> list[str]:
        ks = [(k[1], v.avg_seconds) for k, v in self.cells.items() if k[0] == module]
        return [k for k, _ in sorted(ks, key=lambda kv: kv[1])]

    def reference_order_holds(self, module: str) -> bool:
        a = {k[1]: v.avg_seconds for k, v in self.cells.items() if k[0] == module}
        if not all(k in a for k in ("LR", "ANN", "RF", "GB", "RNN")):
            return False
        return a["LR"] < a["ANN"] < min(a["RF"], a["GB"]) and max(a["RF"], a["GB"]) < a["RNN"]

    def format_table(self) -> str:
        lines = [f"{'module':<11}{'learner':<9}{'avg s':>12}{'std s':>12}{'n':>5}"]
        for (m, k), c in sorted(self.cells.items(), key=lambda kv: (kv[0][0], kv[1].avg_seconds)):
            lines.append(f"{m:<11}{k:<9}{c.avg_seconds:>12.5f}{c.std_seconds:>12.5f}{c.samples:>5d}")
        for m in sorted({k[0] for k in self.cells}):
            verdict = "holds" if self.reference_order_holds(m) else "does not hold"
            lines.append(f"{m}: {' < '.join(self.ordering(m))} ({REFERENCE_ORDER} {verdict})")
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["module", "learner", "avg_seconds", "std_seconds", "samples"])
            for (m, k), c in sorted(self.cells.items()):
                w.writerow([m, k, repr(c.avg_seconds), repr(c.std_seconds), c.samples])


def bench_training(
    stream,
    now: int,
    cfg: FeiConfig,
    kinds: Sequence[str] = ("LR", "ANN", "RF", "GB", "RNN"),
    repetitions: int = 30,
    modules: Sequence[str] = MODULES,
    clock=time.perf_counter,
) -> TimingReport:
    """Average wall time of ``fit`` (cross-validation included) per module and learner.

    The CEI/FEI-I workload is the CEI matrix for ``g1`` at ``now``; FEI-II
    is module II's matrix. One untimed fit per cell runs first so that
    one-off compilation is not counted.
    """
    if repetitions < 30:
        raise ParameterError("repetitions must be >= 30")
    history = as_history(stream, cfg.scores)
    data = {}
    if "CEI/FEI-I" in modules:
        data["CEI/FEI-I"] = cei.build_training(history, now, cfg.module1(1))
    if "FEI-II" in modules:
        data["FEI-II"] = fei.build_training_II(history, now, cfg)
    report = TimingReport()
    for m, d in data.items():
        for k in kinds:
            kind = Kind.parse(k).value
            fit(kind, d, cfg.cv_folds, cfg.seed, None, cfg.threads)
            times = []
            for r in range(repetitions):
                t0 = clock()
                fit(kind, d, cfg.cv_folds, cfg.seed + r, None, cfg.threads)
                times.append(clock() - t0)
            report.cells[(m, kind)] = TimingStats(
                statistics.fmean(times), statistics.stdev(times), len(times), times
            )
    return report
