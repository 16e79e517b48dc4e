"""Command-line entry point: ``seqcast {forecast,compare,telemetry}``."""

import argparse
import csv
import json
import os
import sys

from . import __version__
from .arima import ArimaOrder
from .harness import compare, ComparisonRow, evaluate_series, loss_stats
from .pipeline import DataError, load_series, scale_fit_transform, split, to_supervised
from .trainer import TrainConfig, fit

MODEL_NAMES = {"arima": "ARIMA", "lstm": "LSTM", "bilstm": "BiLSTM"}
DEFAULTS = {
    "column": "Adj Close",
    "epochs": 1,
    "neurons": 4,
    "seed": 7,
    "split": 0.7,
    "lookback": 1,
    "batch_size": 32,
    "clip_norm": 5.0,
    "learning_rate": 0.001,
    "arima_order": "5,1,0",
    "rolling": None,
}


class CliError(Exception):
    pass


def _common(p):
    p.add_argument("--config", help="JSON file of option overrides (flags take precedence)")
    p.add_argument("--column", help="value column to read (default 'Adj Close')")
    p.add_argument("--epochs", type=int)
    p.add_argument("--neurons", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--split", type=float, help="training fraction (default 0.7)")
    p.add_argument("--lookback", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--clip-norm", type=float)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--arima-order", help="p,d,q (default 5,1,0)")
    p.add_argument("--rolling", choices=["listing", "retrain"],
                   help="refit policy inside the walk; default: ARIMA retrains, networks do not")


def build_parser():
    parser = argparse.ArgumentParser(prog="seqcast", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forecast", help="walk-forward forecast with one model")
    p.add_argument("--input", required=True, help="CSV path or bundled:NAME")
    p.add_argument("--model", required=True, choices=sorted(MODEL_NAMES))
    p.add_argument("--output", help="forecast dump CSV (timestamp, actual, predicted)")
    _common(p)

    p = sub.add_parser("compare", help="RMSE comparison table across models and series")
    p.add_argument("--input", required=True, nargs="+")
    p.add_argument("--models", nargs="+", default=["arima", "lstm", "bilstm"],
                   choices=sorted(MODEL_NAMES))
    p.add_argument("--output", help="comparison report CSV")
    p.add_argument("--json", help="comparison report as JSON")
    p.add_argument("--dump-dir", help="directory for per-model forecast dumps")
    _common(p)

    p = sub.add_parser("telemetry", help="per-batch training loss and per-epoch statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True, choices=["lstm", "bilstm"])
    p.add_argument("--trace", required=True, help="loss trace CSV (epoch, batch_step, loss)")
    p.add_argument("--summary", help="per-epoch min/max/sd/n_batches CSV")
    _common(p)
    return parser


def effective_config(args):
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def train_config(cfg):
    try:
        return TrainConfig(epochs=cfg["epochs"], neurons=cfg["neurons"], batch_size=cfg["batch_size"],
                           lookback=cfg["lookback"], clip_norm=cfg["clip_norm"], seed=cfg["seed"],
                           learning_rate=cfg["learning_rate"])
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _header_lines(cfg, extra=()):
    items = [("seqcast", __version__)] + sorted((k, v) for k, v in cfg.items()) + list(extra)
    return "".join(f"# {k}: {v}\n" for k, v in items)


def _load(path, cfg):
    return load_series(path, cfg["column"])


def cmd_forecast(args, cfg):
    series = _load(args.input, cfg)
    kind = MODEL_NAMES[args.model]
    run = evaluate_series(series, [kind], train_config(cfg), ArimaOrder.parse(cfg["arima_order"]),
                          cfg["split"], cfg["rolling"])[kind]
    if args.output:
        _write_dump(args.output, run, cfg, series.name)
    print(f"{series.name} {kind} RMSE {run.rmse:.6f}")
    return 0


def _write_dump(path, run, cfg, name):
    run.write_csv(path + ".tmp")
    with open(path + ".tmp") as fh:
        body = fh.read()
    os.remove(path + ".tmp")
    with open(path, "w") as fh:
        fh.write(_header_lines(cfg, [("series", name), ("model", run.model_kind)]) + body)


def cmd_compare(args, cfg):
    kinds = [MODEL_NAMES[m] for m in dict.fromkeys(args.models)]
    if len(kinds) < 2:
        raise CliError("compare needs at least two distinct models")
    tcfg, order = train_config(cfg), ArimaOrder.parse(cfg["arima_order"])
    rows, failures = [], []
    for path in args.input:
        series = _load(path, cfg)
        rmses = {}
        for kind in kinds:
            try:
                run = evaluate_series(series, [kind], tcfg, order, cfg["split"], cfg["rolling"])[kind]
            except (ValueError, RuntimeError, ArithmeticError) as exc:
                failures.append(f"{series.name} {kind}: {exc}")
                continue
            rmses[kind] = run.rmse
            if args.dump_dir:
                os.makedirs(args.dump_dir, exist_ok=True)
                _write_dump(os.path.join(args.dump_dir, f"{series.name}_{kind}.csv"), run, cfg, series.name)
        rows.append(ComparisonRow.from_rmse(series.name, rmses.get("ARIMA"), rmses.get("LSTM"),
                                            rmses.get("BiLSTM")))
    header = {"seqcast": __version__, **{k: cfg[k] for k in sorted(cfg)}, "models": " ".join(kinds)}
    report = compare(rows, header, failures)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(report.to_csv())
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(report.to_json() + "\n")
    sys.stdout.write(report.to_text())
    for fail in failures:
        print(f"seqcast: failed: {fail}", file=sys.stderr)
    return 1 if failures else 0


def cmd_telemetry(args, cfg):
    series = _load(args.input, cfg)
    tcfg = train_config(cfg)
    train, test = split(series, cfg["split"])
    scaled, _, _ = scale_fit_transform(train.values, test.values)
    option = "L" if args.model == "lstm" else "B"
    _, trace = fit(option, to_supervised(scaled, tcfg.lookback), tcfg)
    trace.write_csv(args.trace)
    lines = ["epoch  min       max       sd        n_batches"]
    rows = []
    for epoch in trace.epochs():
        st = loss_stats(trace, epoch)
        rows.append([epoch, repr(st.min), repr(st.max), repr(st.sd), st.n_batches])
        lines.append(f"{epoch:<6} {st.min:<9.5f} {st.max:<9.5f} {st.sd:<9.5f} {st.n_batches}")
    if args.summary:
        with open(args.summary, "w", newline="") as fh:
            fh.write(_header_lines(cfg, [("series", series.name), ("model", args.model)]))
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "min", "max", "sd", "n_batches"])
            w.writerows(rows)
    print("\n".join(lines))
    return 0


COMMANDS = {"forecast": cmd_forecast, "compare": cmd_compare, "telemetry": cmd_telemetry}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        return COMMANDS[args.command](args, cfg)
    except (CliError, DataError, OSError, ValueError, RuntimeError) as exc:
        msg = " ".join(str(exc).split())
        print(f"seqcast: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
