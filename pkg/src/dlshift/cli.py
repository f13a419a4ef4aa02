"""Command-line interface: ``dlshift <subcommand> [options]``.

Exit status is 0 on success, 1 on a domain error (bad data, insufficient
history, corrupt model file, ...) and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from pathlib import Path

from . import cei, evalharness, fei, stats, synthgen
from .config import RunConfig, load_run_config
from .errors import DlshiftError, ParameterError
from .gfunc import Action, ActionSequence, TransactionHistory
from .learners import Kind
from .learners import modelio as ser
from .stream import TransactionTable, export_csv, export_jsonl, ingest, write_rejects

log = logging.getLogger("dlshift")

ALL_KINDS = ("LR", "ANN", "RF", "GB", "RNN")


def _kv(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _kind_list(text: str) -> list[str]:
    try:
        return [Kind.parse(x).value for x in text.split(",") if x.strip()]
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _target(text: str) -> int:
    t = text.lower().removeprefix("g")
    if t not in ("1", "2", "3", "4"):
        raise argparse.ArgumentTypeError(f"target must be g1..g4, got {text!r}")
    return int(t)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="flat key=value configuration file")
    common.add_argument("--set", metavar="KEY=VALUE", type=_kv, action="append", default=[],
                        help="override one configuration key (repeatable)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    common.add_argument("--threads", type=int,
                        help="worker threads; falls back to $DLSHIFT_THREADS, then the config file, then 1")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="dlshift", description="Decision-environment inference under delayed labels.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    g = sub.add_parser("generate", parents=[common], help="write a synthetic transaction stream")
    g.add_argument("--out", required=True, help="output file (.csv or .jsonl)")
    g.add_argument("--periods", type=int, help="number of periods")
    g.add_argument("--txns-per-period", type=int, help="mean transactions per period")

    c = sub.add_parser("corr", parents=[common], help="lag-selection tests of g1 against the lagged chargeback rate")
    c.add_argument("--stream", required=True, help="transaction file")
    c.add_argument("--lags", type=_int_list, default=[1, 2, 3, 4], help="candidate lags (default 1,2,3,4)")
    c.add_argument("--out", help="also write the table to this file")

    for name, helptext in (("train-cei", "train a current-environment model"),
                           ("train-fei", "train a future-environment model bundle")):
        t = sub.add_parser(name, parents=[common], help=helptext)
        t.add_argument("--stream", required=True, help="transaction file")
        t.add_argument("--now", type=int, required=True, help="current period index")
        t.add_argument("--kind", type=lambda v: _kind_list(v)[0], help="learner: LR, ANN, RF, GB or RNN")
        t.add_argument("--out", required=True, help="model file to write")
        if name == "train-cei":
            t.add_argument("--target", type=_target, help="g1 .. g4 (default g1)")
        else:
            t.add_argument("--module1-g1", action="store_true", help="also train a module-I model for g1")

    pr = sub.add_parser("predict", parents=[common], help="predict g for the current (or a future) period")
    pr.add_argument("--model", required=True, help="model file from train-cei or train-fei")
    pr.add_argument("--stream", required=True, help="transaction file")
    pr.add_argument("--now", type=int, required=True, help="current period index")
    pr.add_argument("--future", action="store_true", help="FEI: predict g1 of period now + l")
    pr.add_argument("--actions", help="CSV with columns Action (App/Rev/Rej), RiskScore; "
                                      "defaults to the stream's own decisions in period now")
    pr.add_argument("--out", help="write CSV here instead of stdout")

    e = sub.add_parser("evaluate", parents=[common], help="walk-forward evaluation against persistence")
    e.add_argument("--stream", required=True, help="transaction file")
    e.add_argument("--weeks", type=int, default=10, help="number of test periods (default 10)")
    e.add_argument("--start", type=int, help="first test period (default: periods - weeks - l)")
    e.add_argument("--kinds", type=_kind_list, default=list(ALL_KINDS), help="learners (default all five)")
    e.add_argument("--frameworks", default="CEI,FEI", help="CEI, FEI or both (default CEI,FEI)")
    e.add_argument("--out", default="report.csv", help="report CSV (default report.csv)")
    e.add_argument("--table", help="also write the formatted table here")
    e.add_argument("--log", help="prediction log (JSON lines)")

    b = sub.add_parser("bench", parents=[common], help="time model fitting per learner")
    b.add_argument("--stream", required=True, help="transaction file")
    b.add_argument("--now", type=int, default=31, help="period whose training matrices are timed (default 31)")
    b.add_argument("--repetitions", type=int, default=30, help="timed fits per cell (>= 30)")
    b.add_argument("--kinds", type=_kind_list, default=list(ALL_KINDS), help="learners (default all five)")
    b.add_argument("--out", help="timing CSV")
    return p


def _threads(args, cfg_threads: int) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("DLSHIFT_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ParameterError(f"DLSHIFT_THREADS must be an integer, got {env!r}") from None
    return cfg_threads


def _overrides(args) -> dict[str, str]:
    values = dict(args.set)
    if getattr(args, "seed", None) is not None:
        values["seed"] = str(args.seed)
    return values


def _run_config(args) -> RunConfig:
    cfg = load_run_config(args.config, _overrides(args))
    cfg.threads = _threads(args, cfg.threads)
    if getattr(args, "kind", None):
        cfg.kind = args.kind
    if getattr(args, "target", None):
        cfg.target = args.target
    return cfg


def _load_history(path, cfg: RunConfig) -> TransactionHistory:
    result = ingest(path)
    if result.rejects:
        log.warning("%d rows rejected while reading %s", len(result.rejects), path)
        write_rejects(result.rejects, str(path) + ".rejects.csv")
    table = TransactionTable.from_transactions(result.transactions)
    return TransactionHistory(table, cfg.grid, cfg.scores)


def _write_text(text: str, path) -> None:
    Path(path).write_text(text, encoding="utf-8")


def cmd_generate(args) -> int:
    values = synthgen.parse_kv(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    values.update(_overrides(args))
    if args.periods is not None:
        values["periods"] = str(args.periods)
    if args.txns_per_period is not None:
        values["txns_per_period"] = str(args.txns_per_period)
    gcfg = synthgen.config_from_mapping(values)
    txns = synthgen.generate(gcfg)
    if str(args.out).endswith((".jsonl", ".json")):
        export_jsonl(txns, args.out)
    else:
        export_csv(txns, args.out)
    log.info("wrote %d transactions to %s", len(txns), args.out)
    return 0


def cmd_corr(args) -> int:
    cfg = _run_config(args)
    h = _load_history(args.stream, cfg)
    pooled = h.aggregate_g(h.horizon, 1)
    full = h.full_rate()
    mature = [p for p in range(h.n_periods) if h.is_mature(p, cfg.L)]
    g_series = {p: float(pooled[p]) for p in mature if not math.isnan(pooled[p])}
    rate = {p: float(full[p]) for p in mature if not math.isnan(full[p])}
    best, reports = stats.select_lag(g_series, rate, args.lags)
    text = "g1 (all scores) vs chargeback rate lagged by l\n" + stats.format_lag_table(reports)
    text += f"selected lag: {best}\n"
    sys.stdout.write(text)
    if args.out:
        _write_text(text, args.out)
    return 0


def cmd_train_cei(args) -> int:
    cfg = _run_config(args)
    h = _load_history(args.stream, cfg)
    model = cei.train(h, args.now, cfg.cei())
    ser.save(model, args.out)
    log.info("trained %s for g%d on %s", model.kind.value, cfg.target, args.now)
    return 0


def cmd_train_fei(args) -> int:
    cfg = _run_config(args)
    h = _load_history(args.stream, cfg)
    fc = cfg.fei()
    fc.module1_g1 = args.module1_g1
    model = fei.train_fei(h, args.now, fc)
    Path(args.out).write_bytes(fei.serialize_fei(model))
    return 0


def _read_actions(path) -> ActionSequence:
    acts, scores = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"Action", "RiskScore"} <= set(reader.fieldnames):
            raise ParameterError("actions file needs columns Action and RiskScore")
        for i, row in enumerate(reader, start=2):
            try:
                acts.append(Action(row["Action"].strip()))
                scores.append(int(row["RiskScore"]))
            except ValueError:
                raise ParameterError(f"actions file line {i}: bad row {row}") from None
    return ActionSequence(tuple(acts), tuple(scores))


def _config_from_model(meta: dict, cfg: RunConfig, kind: str) -> dict:
    fp = meta.get("fingerprint") or {}
    return dict(L=fp.get("L", cfg.L), D=fp.get("D", cfg.D), l=fp.get("l", cfg.l),
                scores=tuple(fp.get("scores", cfg.scores)), kind=kind)


def _emit_predictions(pred: dict, out) -> None:
    lines = ["score,g_hat"] + [f"{s},{'' if v is None else repr(v)}" for s, v in sorted(pred.items())]
    text = "\n".join(lines) + "\n"
    if out:
        _write_text(text, out)
    else:
        sys.stdout.write(text)


def cmd_predict(args) -> int:
    cfg = _run_config(args)
    blob = Path(args.model).read_bytes()
    if blob[:4] == fei.BUNDLE_MAGIC:
        if not args.future:
            raise ParameterError("this is an FEI bundle; pass --future")
        model = fei.deserialize_fei(blob)
        fc = fei.FeiConfig(**_config_from_model(model.module2.meta, cfg, model.module2.kind.value))
        h = _load_history(args.stream, replace_scores(cfg, fc.scores))
        seq = _read_actions(args.actions) if args.actions else h.actions(args.now)
        pred = fei.predict_future(model, h, args.now, seq, fc)
    else:
        if args.future:
            raise ParameterError("--future needs a model bundle from train-fei")
        model = ser.deserialize(blob)
        cc = cei.CeiConfig(target=int(model.meta.get("target", 1)),
                           **_config_from_model(model.meta, cfg, model.kind.value))
        h = _load_history(args.stream, replace_scores(cfg, cc.scores))
        pred = cei.predict_current(model, h, args.now, cc)
    _emit_predictions(pred, args.out)
    return 0


def replace_scores(cfg: RunConfig, scores) -> RunConfig:
    cfg.scores = tuple(scores)
    return cfg


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    h = _load_history(args.stream, cfg)
    frameworks = [f.strip().upper() for f in args.frameworks.split(",") if f.strip()]
    bad = set(frameworks) - {"CEI", "FEI"}
    if bad or not frameworks:
        raise ParameterError(f"unknown framework(s) {sorted(bad)}; use CEI and/or FEI")
    cfgs = []
    if "CEI" in frameworks:
        cfgs += [cfg.cei(k) for k in args.kinds]
    if "FEI" in frameworks:
        cfgs += [cfg.fei(k) for k in args.kinds]
    report = evalharness.walk_forward(h, args.start, args.weeks, cfgs)
    report.to_csv(args.out)
    table = report.format_table()
    sys.stdout.write(table)
    if args.table:
        _write_text(table, args.table)
    if args.log:
        report.write_log(args.log)
    return 0


def cmd_bench(args) -> int:
    cfg = _run_config(args)
    h = _load_history(args.stream, cfg)
    report = evalharness.bench_training(h, args.now, cfg.fei(), args.kinds, args.repetitions)
    sys.stdout.write(report.format_table())
    if args.out:
        report.to_csv(args.out)
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "corr": cmd_corr,
    "train-cei": cmd_train_cei,
    "train-fei": cmd_train_fei,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.command:
        parser.print_usage(sys.stderr)
        sys.stderr.write("dlshift: error: a subcommand is required\n")
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DlshiftError, ValueError, OSError) as exc:
        sys.stderr.write(f"dlshift: error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
