import os
import subprocess
import sys
from pathlib import Path

import pytest

from dlshift.cli import run

DATA = Path(__file__).parent / "data"
GEN = ["generate", "--seed", "5", "--periods", "40", "--txns-per-period", "1000"]


@pytest.fixture(scope="module")
def stream(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "stream.csv"
    assert run(GEN + ["--out", str(path)]) == 0
    return path


def test_generate_is_byte_identical(stream, tmp_path):
    other = tmp_path / "again.csv"
    assert run(GEN + ["--out", str(other)]) == 0
    assert other.read_bytes() == stream.read_bytes()
    jsonl = tmp_path / "s.jsonl"
    assert run(GEN + ["--out", str(jsonl)]) == 0
    assert len(jsonl.read_text().splitlines()) == len(stream.read_text().splitlines()) - 1


def test_evaluate_end_to_end(stream, tmp_path, capsys):
    paths = [tmp_path / f"r{k}.csv" for k in (0, 1)]
    for p in paths:
        rc = run(["evaluate", "--stream", str(stream), "--weeks", "10", "--kinds", "LR",
                  "--out", str(p), "--log", str(p.with_suffix(".jsonl"))])
        assert rc == 0
    out = capsys.readouterr().out
    assert "CEI g1" in out and "FEI g1" in out
    lines = paths[0].read_text().splitlines()
    assert lines[0] == "framework,learner,target,mse,error_std,n_predictions"
    assert len(lines) == 5
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].with_suffix(".jsonl").read_bytes() == paths[1].with_suffix(".jsonl").read_bytes()


def test_corr_matches_golden(stream, tmp_path, capsys):
    out = tmp_path / "corr.txt"
    assert run(["corr", "--stream", str(stream), "--lags", "1,2,3,4", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert printed == out.read_text()
    assert printed == (DATA / "corr_golden.txt").read_text()


def test_train_and_predict(stream, tmp_path, capsys):
    m1, m2 = tmp_path / "a.bin", tmp_path / "b.bin"
    for m in (m1, m2):
        assert run(["train-cei", "--stream", str(stream), "--now", "30", "--kind", "GB", "--out", str(m)]) == 0
    assert m1.read_bytes() == m2.read_bytes()
    capsys.readouterr()
    assert run(["predict", "--model", str(m1), "--stream", str(stream), "--now", "30"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "score,g_hat" and len(rows) == 21
    assert all(0.0 <= float(r.split(",")[1]) <= 1.0 for r in rows[1:])


def test_train_fei_and_predict_future(stream, tmp_path):
    bundle = tmp_path / "f.bin"
    assert run(["train-fei", "--stream", str(stream), "--now", "30", "--out", str(bundle)]) == 0
    actions = tmp_path / "actions.csv"
    actions.write_text("Action,RiskScore\nApp,100\nRev,550\nRej,900\nApp,300\n")
    out = tmp_path / "pred.csv"
    rc = run(["predict", "--future", "--model", str(bundle), "--stream", str(stream), "--now", "30",
              "--actions", str(actions), "--out", str(out)])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 21
    # an FEI bundle without --future is a domain error
    assert run(["predict", "--model", str(bundle), "--stream", str(stream), "--now", "30"]) == 1


def test_usage_errors(capsys):
    assert run([]) == 2
    assert "usage" in capsys.readouterr().err
    assert run(["evaluate", "--no-such-flag"]) == 2
    assert run(["frobnicate"]) == 2


def test_domain_errors(stream, tmp_path):
    out = tmp_path / "x.bin"
    assert run(["train-cei", "--stream", str(stream), "--now", "10", "--out", str(out)]) == 1
    assert run(["train-cei", "--stream", str(tmp_path / "missing.csv"), "--now", "30", "--out", str(out)]) == 1
    assert run(["evaluate", "--stream", str(stream), "--frameworks", "XYZ"]) == 1
    assert run(["evaluate", "--stream", str(stream), "--set", "L=0"]) == 1


def test_threads_environment_fallback(stream, tmp_path, monkeypatch):
    out = tmp_path / "m.bin"
    monkeypatch.setenv("DLSHIFT_THREADS", "many")
    assert run(["train-cei", "--stream", str(stream), "--now", "30", "--out", str(out)]) == 1
    assert run(["train-cei", "--stream", str(stream), "--now", "30", "--threads", "1", "--out", str(out)]) == 0
    monkeypatch.setenv("DLSHIFT_THREADS", "2")
    other = tmp_path / "n.bin"
    assert run(["train-cei", "--stream", str(stream), "--now", "30", "--out", str(other)]) == 0
    assert other.read_bytes() == out.read_bytes()


def test_config_file_and_overrides(stream, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# reference case\nL = 12\nD = 3\nkind = RF\n")
    out = tmp_path / "m.bin"
    assert run(["train-cei", "--stream", str(stream), "--now", "30", "--config", str(cfg),
                "--set", "l=1", "--out", str(out)]) == 0
    from dlshift.learners import load

    model = load(out)
    assert model.kind.value == "RF"
    assert model.meta["fingerprint"]["D"] == 3 and model.meta["fingerprint"]["l"] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dlshift"], capture_output=True, text=True,
                          env=dict(os.environ))
    assert proc.returncode == 2 and "usage" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "dlshift", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("generate", "corr", "train-cei", "train-fei", "predict", "evaluate", "bench"):
        assert name in proc.stdout
