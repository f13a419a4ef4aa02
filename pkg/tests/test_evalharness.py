import csv
import itertools
import json
import math

import numpy as np
import pytest

from dlshift.cei import CeiConfig
from dlshift.errors import InsufficientHistoryError, ParameterError
from dlshift.evalharness import (
    PERSISTENCE,
    CellStats,
    bench_training,
    default_start,
    mse_from_log,
    walk_forward,
)
from dlshift.fei import FeiConfig
from dlshift.planted import PlantedSpec, constant_world, planted_world


@pytest.fixture(scope="module")
def lr_report(reference_history):
    return walk_forward(reference_history, 28, 10, [CeiConfig(kind="LR"), FeiConfig(kind="LR")])


def test_cell_counts(lr_report, reference_history):
    S = len(reference_history.scores)
    assert set(lr_report.cells) == {
        ("CEI", "LR", 1), ("CEI", PERSISTENCE, 1), ("FEI", "LR", 1), ("FEI", PERSISTENCE, 1),
    }
    for c in lr_report.cells.values():
        assert c.n_predictions == 10 * S
        assert c.mse >= 0 and c.error_std >= 0


def test_mse_recomputed_from_log(lr_report, tmp_path):
    path = tmp_path / "log.jsonl"
    lr_report.write_log(path)
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(records) == sum(c.n_predictions for c in lr_report.cells.values())
    for (fw, learner, j), c in lr_report.cells.items():
        assert mse_from_log(records, fw, learner, j) == pytest.approx(c.mse, rel=1e-12)
        e = [r["prediction"] - r["truth"] for r in records if (r["framework"], r["learner"]) == (fw, learner)]
        mean = sum(e) / len(e)
        std = math.sqrt(sum((x - mean) ** 2 for x in e) / (len(e) - 1))
        assert c.error_std == pytest.approx(std, rel=1e-10)


def test_report_csv(lr_report, tmp_path):
    path = tmp_path / "report.csv"
    lr_report.to_csv(path)
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 4
    for r in rows:
        c = lr_report.cells[(r["framework"], r["learner"], int(r["target"][1:]))]
        assert float(r["mse"]) == c.mse and int(r["n_predictions"]) == c.n_predictions
    text = lr_report.format_table()
    assert "walk-forward weeks 28..37" in text and "persistence" in text


def test_fei_targets_lie_l_ahead(lr_report):
    for r in lr_report.records:
        assert r["target_period"] == r["week"] + (2 if r["framework"] == "FEI" else 0)


def test_persistence_uses_lead_time_old_value():
    h = planted_world(PlantedSpec())
    report = walk_forward(h, 28, 3, [CeiConfig(kind="LR")])
    g = h.g_final()
    idx = {s: i for i, s in enumerate(h.scores)}
    pers = [r for r in report.records if r["learner"] == PERSISTENCE]
    assert len(pers) == 3 * len(h.scores)
    for r in pers:
        assert r["prediction"] == g[r["week"] - 12, idx[r["score"]], 0]


def test_constant_world_has_zero_error():
    h = constant_world(0.7)
    cfgs = [CeiConfig(kind=k) for k in ("LR", "ANN", "RF", "GB", "RNN")] + [FeiConfig(kind="GB")]
    report = walk_forward(h, 28, 2, cfgs)
    for key, c in report.cells.items():
        assert c.mse == pytest.approx(0.0, abs=1e-24), key


def test_immature_truth_is_rejected(reference_history):
    with pytest.raises(InsufficientHistoryError):
        walk_forward(reference_history, 31, 10, [CeiConfig()])
    with pytest.raises(InsufficientHistoryError):
        walk_forward(reference_history, 29, 10, [FeiConfig()])
    with pytest.raises(ParameterError):
        walk_forward(reference_history, 28, 10, [])


def test_default_start():
    assert default_start(40, 10, [CeiConfig()]) == 30
    assert default_start(40, 10, [CeiConfig(), FeiConfig()]) == 28


def test_cell_stats():
    c = CellStats.from_errors([0.1, -0.3, 0.2])
    assert c.mse == pytest.approx((0.01 + 0.09 + 0.04) / 3, abs=1e-15)
    assert c.error_std == pytest.approx(math.sqrt(((0.1) ** 2 + (-0.3) ** 2 + 0.2**2) / 2), abs=1e-15)
    assert CellStats.from_errors([]).n_predictions == 0


def test_bench_statistics_with_fixed_clock(reference_history):
    deltas = [0.01 * (1 + (k % 7)) for k in range(30)]
    ticks = itertools.chain.from_iterable((10.0 * k, 10.0 * k + d) for k, d in enumerate(deltas))
    report = bench_training(
        reference_history, 31, FeiConfig(), kinds=("LR",), repetitions=30, modules=("FEI-II",),
        clock=lambda: next(ticks),
    )
    c = report.cells[("FEI-II", "LR")]
    assert c.samples == 30 and len(c.times) == 30
    mean = sum(deltas) / 30
    std = math.sqrt(sum((d - mean) ** 2 for d in deltas) / 29)
    assert c.avg_seconds == pytest.approx(mean, rel=1e-9)
    assert c.std_seconds == pytest.approx(std, rel=1e-9)
    assert report.ordering("FEI-II") == ["LR"]
    assert not report.reference_order_holds("FEI-II")


def test_bench_needs_thirty_repetitions(reference_history):
    with pytest.raises(ParameterError):
        bench_training(reference_history, 31, FeiConfig(), repetitions=29)


def test_cei_lr_beats_persistence_on_reference_stream(lr_report):
    assert lr_report.cells[("CEI", "LR", 1)].mse < lr_report.baseline("CEI", 1).mse
