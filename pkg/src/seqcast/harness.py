"""Walk-forward evaluation, error metrics, loss statistics and comparison reports."""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .pipeline import to_supervised
from .trainer import TrainConfig, fit, predict_batch

MODEL_KINDS = ("ARIMA", "LSTM", "BiLSTM")


def rmse(actual, predicted):
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actuals vs {p.size} predictions")
    if a.size == 0:
        raise ValueError("rmse of empty input")
    return math.sqrt(float(np.mean((a - p) ** 2)))


def pct_change(new_value, original_value):
    """Relative change in percent, ``(new - original) / original * 100``."""
    if original_value == 0:
        raise ZeroDivisionError("pct_change with zero original value")
    return (new_value - original_value) / original_value * 100.0


@dataclass
class ForecastRun:
    model_kind: str
    predictions: np.ndarray
    actuals: np.ndarray
    timestamps: tuple = ()
    loss_trace: object = None

    @property
    def rmse(self):
        return rmse(self.actuals, self.predictions)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", "actual", "predicted"])
            stamps = self.timestamps or range(len(self.actuals))
            for ts, a, p in zip(stamps, self.actuals, self.predictions):
                w.writerow([str(ts), repr(float(a)), repr(float(p))])


@dataclass
class Forecaster:
    """A trained network together with the scaling it was trained under."""

    net: object
    scaler: object
    lookback: int
    option: str
    cfg: TrainConfig = None


def _warm_state(fc, history_scaled):
    """Run a stateful network over the training windows (zero initial state)."""
    sup = to_supervised(history_scaled, fc.lookback)
    _, state = predict_batch(fc.net, sup.X)
    return state


def walk_forward(fc, history, test, timestamps=(), retrain=False):
    """One-step forecasts over ``test`` (original units).

    ``history`` holds the observations preceding the test segment. Each
    prediction uses only actual values observed before it. A stateful model
    is first run over ``history`` to build its recurrent state. With
    ``retrain`` the network is trained for ``fc.cfg.epochs`` more epochs on
    the expanded history after every observation (slow).
    """
    test = np.asarray(test, dtype=np.float64)
    if test.size == 0:
        raise ValueError("empty test segment")
    L = fc.lookback
    seen = list(fc.scaler.transform(np.asarray(history, dtype=np.float64)))
    if len(seen) < L:
        raise ValueError(f"history of {len(seen)} points cannot fill a lookback of {L}")
    net = fc.net
    state = _warm_state(fc, seen) if net.stateful and len(seen) > L else net.zero_state()
    preds = np.empty(len(test))
    scaled_test = fc.scaler.transform(test)
    for k in range(len(test)):
        window = np.array(seen[-L:])[None, :]
        out, final = predict_batch(net, window, state)
        preds[k] = fc.scaler.inverse(out[0])
        seen.append(float(scaled_test[k]))
        if net.stateful:
            state = final
        if retrain:
            net, _ = fit(fc.option, to_supervised(np.array(seen), L), fc.cfg, net=net)
            if net.stateful:
                state = _warm_state(replace(fc, net=net), seen)
    return ForecastRun("LSTM" if fc.option == "L" else "BiLSTM", preds, test, tuple(timestamps))


@dataclass(frozen=True)
class LossStats:
    min: float
    max: float
    sd: float
    n_batches: int


def loss_stats(trace, epoch):
    """Min, max and population SD of the per-batch losses of one epoch."""
    losses = trace.losses(epoch)
    if losses.size == 0:
        raise KeyError(f"epoch {epoch} not present in trace")
    return LossStats(float(losses.min()), float(losses.max()), float(losses.std()), int(losses.size))


PCT_FIELDS = (
    ("pct_bilstm_over_lstm", "rmse_bilstm", "rmse_lstm"),
    ("pct_bilstm_over_arima", "rmse_bilstm", "rmse_arima"),
    ("pct_lstm_over_arima", "rmse_lstm", "rmse_arima"),
)
ROW_FIELDS = ("rmse_arima", "rmse_lstm", "rmse_bilstm") + tuple(f[0] for f in PCT_FIELDS)


def _nan(x):
    return float("nan") if x is None else float(x)


@dataclass
class ComparisonRow:
    series: str
    rmse_arima: float = float("nan")
    rmse_lstm: float = float("nan")
    rmse_bilstm: float = float("nan")
    pct_bilstm_over_lstm: float = float("nan")
    pct_bilstm_over_arima: float = float("nan")
    pct_lstm_over_arima: float = float("nan")

    @classmethod
    def from_rmse(cls, series, arima=None, lstm=None, bilstm=None):
        row = cls(series, _nan(arima), _nan(lstm), _nan(bilstm))
        for name, new, orig in PCT_FIELDS:
            a, b = getattr(row, new), getattr(row, orig)
            if not (math.isnan(a) or math.isnan(b)):
                setattr(row, name, pct_change(a, b))
        return row

    def values(self):
        return [getattr(self, f) for f in ROW_FIELDS]


@dataclass
class ComparisonReport:
    rows: list
    average: ComparisonRow
    header: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        for key, value in self.header.items():
            buf.write(f"# {key}: {value}\n")
        for fail in self.failures:
            buf.write(f"# failed: {fail}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("series",) + ROW_FIELDS)
        for row in self.rows + [self.average]:
            w.writerow([row.series] + ["" if math.isnan(v) else f"{v:.6f}" for v in row.values()])
        return buf.getvalue()

    def to_json(self):
        clean = lambda r: {k: (None if isinstance(v, float) and math.isnan(v) else v)
                           for k, v in asdict(r).items()}
        return json.dumps({"config": self.header, "rows": [clean(r) for r in self.rows],
                           "average": clean(self.average), "failures": self.failures},
                          indent=2, sort_keys=True)

    def to_text(self):
        titles = ("Series", "ARIMA", "LSTM", "BiLSTM", "Bi/LSTM%", "Bi/ARIMA%", "LSTM/ARIMA%")
        fmt = lambda v: "-" if math.isnan(v) else f"{v:.2f}"
        body = [[r.series] + [fmt(v) for v in r.values()] for r in self.rows + [self.average]]
        widths = [max(len(titles[i]), *(len(b[i]) for b in body)) for i in range(len(titles))]
        line = lambda cells: "  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                                       for i, (c, w) in enumerate(zip(cells, widths)))
        out = [line(titles), "-" * len(line(titles))]
        out += [line(b) for b in body[:-1]]
        out += ["-" * len(line(titles)), line(body[-1])]
        return "\n".join(out) + "\n"


def compare(rows, header=None, failures=()):
    """Attach an average row: the mean of every column taken independently.

    Percentage columns are averaged as percentages rather than recomputed
    from the averaged errors. Missing (NaN) cells are ignored per column.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("compare needs at least one row")
    avg = ComparisonRow("Average")
    for f in ROW_FIELDS:
        col = np.array([getattr(r, f) for r in rows], dtype=np.float64)
        col = col[~np.isnan(col)]
        setattr(avg, f, float(col.mean()) if col.size else float("nan"))
    return ComparisonReport(rows, avg, dict(header or {}), list(failures))


def evaluate_series(series, models, cfg, order, fraction=0.70, rolling=None):
    """Run each model on one :class:`SeriesFrame` under a shared split.

    ``rolling`` is ``"listing"`` (no refit inside the walk), ``"retrain"``
    (refit after every observation) or ``None`` for the per-model default:
    neural models do not refit, ARIMA refits.
    Returns ``{kind: ForecastRun}`` in the order requested.
    """
    from .arima import rolling_forecast
    from .pipeline import scale_fit_transform, split

    train, test = split(series, fraction)
    runs = {}
    for kind in models:
        if kind == "ARIMA":
            refit = rolling != "listing"
            preds = rolling_forecast(train.values, test.values, order, refit=refit)
            runs[kind] = ForecastRun(kind, preds, test.values.copy(), test.timestamps)
            continue
        option = {"LSTM": "L", "BiLSTM": "B"}[kind]
        scaled_train, _, scaler = scale_fit_transform(train.values, test.values)
        net, trace = fit(option, to_supervised(scaled_train, cfg.lookback), cfg)
        fc = Forecaster(net, scaler, cfg.lookback, option, cfg)
        run = walk_forward(fc, train.values, test.values, test.timestamps,
                           retrain=rolling == "retrain")
        run.loss_trace = trace
        runs[kind] = run
    return runs
