import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from seqcast.cli import main
from seqcast.pipeline import bundled_path

SMALL = "bundled:setar"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def naive_rmse_from_file(path, fraction=0.7):
    with open(path, newline="") as fh:
        values = [float(r["Adj Close"]) for r in csv.DictReader(fh)]
    k = int(len(values) * fraction)
    errs = [(values[i] - values[i - 1]) ** 2 for i in range(k, len(values))]
    return math.sqrt(sum(errs) / len(errs))


def read_report(path):
    lines = [ln for ln in open(path) if not ln.startswith("#")]
    return list(csv.DictReader(lines))


class TestForecast:
    def test_lstm_repeatable(self, tmp_path, capsys):
        argv = ["forecast", "--input", "bundled:synthetic_price", "--model", "lstm", "--seed", "7"]
        c1, out1, _ = run(argv + ["--output", str(tmp_path / "a.csv")], capsys)
        c2, out2, _ = run(argv + ["--output", str(tmp_path / "b.csv")], capsys)
        assert c1 == c2 == 0
        assert out1 == out2 and "RMSE" in out1
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_missing_column(self, capsys):
        code, _, err = run(["forecast", "--input", SMALL, "--model", "lstm", "--column", "Settle"], capsys)
        assert code != 0
        assert "Settle" in err and len(err.strip().splitlines()) == 1

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(["forecast", "--input", str(tmp_path / "nope.csv"), "--model", "arima"], capsys)
        assert code != 0 and err.startswith("seqcast: error:")

    def test_random_walk_arima_is_naive(self, tmp_path, capsys):
        dump = tmp_path / "d.csv"
        code, out, _ = run(["forecast", "--input", "bundled:synthetic_price", "--model", "arima",
                            "--arima-order", "0,1,0", "--output", str(dump)], capsys)
        assert code == 0
        reported = float(out.split()[-1])
        assert reported == pytest.approx(naive_rmse_from_file(bundled_path("synthetic_price")), abs=1e-6)
        rows = read_report(dump)
        assert len(rows) == 540

    def test_header_echoes_config(self, tmp_path, capsys):
        dump = tmp_path / "d.csv"
        run(["forecast", "--input", SMALL, "--model", "bilstm", "--neurons", "3", "--output", str(dump)], capsys)
        head = dump.read_text()
        assert "# neurons: 3" in head and "# seed: 7" in head and "# arima_order: 5,1,0" in head


class TestConfigPrecedence:
    def test_file_then_flags(self, tmp_path, capsys):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"epochs": 2, "neurons": 3}))
        summary = tmp_path / "s.csv"
        code, _, _ = run(["telemetry", "--input", SMALL, "--model", "lstm", "--config", str(conf),
                          "--neurons", "5", "--trace", str(tmp_path / "t.csv"), "--summary", str(summary)], capsys)
        assert code == 0
        text = summary.read_text()
        assert "# epochs: 2" in text and "# neurons: 5" in text

    def test_unknown_key(self, tmp_path, capsys):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"epochz": 2}))
        code, _, err = run(["forecast", "--input", SMALL, "--model", "lstm", "--config", str(conf)], capsys)
        assert code != 0 and "epochz" in err

    def test_invalid_value(self, capsys):
        code, _, err = run(["forecast", "--input", SMALL, "--model", "lstm", "--epochs", "0"], capsys)
        assert code != 0 and "epochs" in err


class TestCompare:
    def test_one_series(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code, text, _ = run(["compare", "--input", SMALL, "--output", str(out),
                             "--json", str(tmp_path / "r.json")], capsys)
        assert code == 0
        rows = read_report(out)
        assert [r["series"] for r in rows] == ["setar", "Average"]
        assert {k: v for k, v in rows[0].items() if k != "series"} == \
            {k: v for k, v in rows[1].items() if k != "series"}
        r = {k: float(v) for k, v in rows[0].items() if k != "series"}
        assert r["pct_bilstm_over_lstm"] == pytest.approx(
            (r["rmse_bilstm"] - r["rmse_lstm"]) / r["rmse_lstm"] * 100, abs=1e-4)
        assert r["pct_lstm_over_arima"] == pytest.approx(
            (r["rmse_lstm"] - r["rmse_arima"]) / r["rmse_arima"] * 100, abs=1e-4)
        assert "Average" in text
        assert json.loads((tmp_path / "r.json").read_text())["rows"][0]["series"] == "setar"

    def test_two_series_average(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code, _, _ = run(["compare", "--input", SMALL, "bundled:expar", "--models", "arima", "bilstm",
                          "--output", str(out), "--dump-dir", str(tmp_path / "dumps")], capsys)
        assert code == 0
        rows = read_report(out)
        a, b, avg = rows
        for f in ("rmse_arima", "rmse_bilstm", "pct_bilstm_over_arima"):
            assert float(avg[f]) == pytest.approx((float(a[f]) + float(b[f])) / 2, abs=2e-6)
        assert avg["rmse_lstm"] == ""
        assert sorted(p.name for p in (tmp_path / "dumps").iterdir()) == \
            ["expar_ARIMA.csv", "expar_BiLSTM.csv", "setar_ARIMA.csv", "setar_BiLSTM.csv"]

    def test_needs_two_models(self, capsys):
        code, _, err = run(["compare", "--input", SMALL, "--models", "lstm", "lstm"], capsys)
        assert code != 0 and "two" in err

    def test_failure_recorded(self, tmp_path, capsys):
        flat = tmp_path / "flat.csv"
        flat.write_text("Date,Adj Close\n" + "".join(f"2020-01-{d:02d},5.0\n" for d in range(1, 32)) +
                        "".join(f"2020-02-{d:02d},5.0\n" for d in range(1, 29)))
        out = tmp_path / "r.csv"
        code, _, err = run(["compare", "--input", SMALL, str(flat), "--models", "arima", "lstm",
                            "--output", str(out)], capsys)
        assert code == 1
        assert "flat ARIMA" in err and "flat LSTM" in err
        assert "# failed: flat ARIMA" in out.read_text()
        assert [r["series"] for r in read_report(out)] == ["setar", "flat", "Average"]


class TestTelemetry:
    def test_two_epochs(self, tmp_path, capsys):
        trace, summary = tmp_path / "t.csv", tmp_path / "s.csv"
        code, text, _ = run(["telemetry", "--input", "bundled:synthetic_price", "--model", "bilstm",
                             "--epochs", "2", "--trace", str(trace), "--summary", str(summary)], capsys)
        assert code == 0
        rows = read_report(summary)
        assert [int(r["epoch"]) for r in rows] == [1, 2]
        records = list(csv.DictReader(open(trace)))
        per_epoch = int(rows[0]["n_batches"])
        assert per_epoch == math.ceil((1260 - 1) / 32)
        assert len(records) == 2 * per_epoch
        for r in rows:
            losses = np.array([float(x["loss"]) for x in records if x["epoch"] == r["epoch"]])
            assert float(r["sd"]) == pytest.approx(losses.std(), rel=1e-12)
            assert float(r["min"]) == losses.min() and float(r["max"]) == losses.max()
        assert len(text.splitlines()) == 3

    def test_rejects_arima(self, capsys):
        with pytest.raises(SystemExit):
            main(["telemetry", "--input", SMALL, "--model", "arima", "--trace", "x.csv"])


def test_console_script_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "seqcast.cli", "forecast", "--input", SMALL,
                          "--model", "arima", "--arima-order", "0,1,0"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and res.stdout.startswith("setar ARIMA RMSE")
