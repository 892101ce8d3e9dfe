import csv
from pathlib import Path

import numpy as np
import pytest

from leofl_plots import SchemaError, load_series, moving_average, plot_accuracy
from leofl_plots.cli import main

FIXTURES = Path(__file__).resolve().parent / "fixtures"
ASYNC_CSV = FIXTURES / "reference_async.csv"
SYNC_CSV = FIXTURES / "reference_sync.csv"


def read_columns(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([float(r["sim_time_s"]) for r in rows]),
            np.array([float(r["test_accuracy"]) for r in rows]))


class TestLoadSeries:
    def test_reads_fixture(self):
        s = load_series(ASYNC_CSV, "async")
        times, accs = read_columns(ASYNC_CSV)
        assert np.array_equal(s.times, times)
        assert np.array_equal(s.accuracies, accs)
        assert s.label == "async"

    def test_default_label_is_stem(self):
        assert load_series(ASYNC_CSV).label == "reference_async"

    def test_missing_column_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("sim_time_s,loss\n0.0,2.3\n")
        with pytest.raises(SchemaError, match="test_accuracy"):
            load_series(bad)

    def test_crossing_time(self):
        s = load_series(ASYNC_CSV)
        t = s.crossing_time(0.75)
        assert t is not None
        assert s.accuracies[list(s.times).index(t)] >= 0.75
        assert s.crossing_time(2.0) is None


class TestMovingAverage:
    def test_window_one_is_identity(self):
        s = load_series(ASYNC_CSV)
        assert moving_average(s, 1) is s

    def test_window_three(self):
        s = load_series(ASYNC_CSV)
        sm = moving_average(s, 3)
        assert sm.accuracies[0] == pytest.approx(s.accuracies[:3].mean())
        assert len(sm.times) == len(s.times) - 2


class TestPlotAccuracy:
    def test_single_csv_smoke(self, tmp_path):
        out = tmp_path / "fig.svg"
        fig = plot_accuracy([ASYNC_CSV], ["async"], out)
        assert out.exists() and out.stat().st_size > 0
        assert len(fig.axes[0].get_lines()) == 1

    def test_plotted_arrays_equal_csv(self, tmp_path):
        out = tmp_path / "fig.svg"
        fig = plot_accuracy([ASYNC_CSV, SYNC_CSV], ["async", "sync"], out)
        lines = fig.axes[0].get_lines()
        for line, path in zip(lines, (ASYNC_CSV, SYNC_CSV)):
            times, accs = read_columns(path)
            assert np.array_equal(line.get_xdata(), times)
            assert np.array_equal(line.get_ydata(), 100.0 * accs)

    def test_async_crosses_target_earlier(self, tmp_path):
        out = tmp_path / "fig.svg"
        fig = plot_accuracy([ASYNC_CSV, SYNC_CSV], ["async", "sync"], out)
        crossings = []
        for line in fig.axes[0].get_lines():
            x, y = line.get_xdata(), line.get_ydata()
            hits = np.flatnonzero(y >= 75.0)
            crossings.append(x[hits[0]])
        assert crossings[0] < crossings[1]

    def test_time_unit_hours(self, tmp_path):
        out = tmp_path / "fig.svg"
        fig = plot_accuracy([ASYNC_CSV], None, out, time_unit="h")
        times, _ = read_columns(ASYNC_CSV)
        assert np.array_equal(fig.axes[0].get_lines()[0].get_xdata(),
                              times / 3600.0)

    def test_smoothing_off_by_default(self, tmp_path):
        fig_raw = plot_accuracy([ASYNC_CSV], None, tmp_path / "raw.svg")
        fig_sm = plot_accuracy([ASYNC_CSV], None, tmp_path / "sm.svg", smooth=3)
        raw = fig_raw.axes[0].get_lines()[0].get_ydata()
        sm = fig_sm.axes[0].get_lines()[0].get_ydata()
        assert len(sm) == len(raw) - 2

    def test_empty_inputs_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            plot_accuracy([], None, tmp_path / "fig.svg")

    def test_label_count_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            plot_accuracy([ASYNC_CSV], ["a", "b"], tmp_path / "fig.svg")


class TestCli:
    def test_happy_path(self, tmp_path, capsys):
        out = tmp_path / "fig.svg"
        rc = main(["--inputs", str(ASYNC_CSV), str(SYNC_CSV),
                   "--labels", "async", "sync", "--out", str(out)])
        assert rc == 0
        assert out.exists()

    def test_pdf_output(self, tmp_path):
        out = tmp_path / "fig.pdf"
        assert main(["--inputs", str(ASYNC_CSV), "--out", str(out)]) == 0
        assert out.exists()

    def test_schema_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("foo,bar\n1,2\n")
        rc = main(["--inputs", str(bad), "--out", str(tmp_path / "fig.svg")])
        assert rc == 1
        assert "sim_time_s" in capsys.readouterr().err

    def test_missing_inputs_usage_error(self):
        assert main(["--out", "fig.svg"]) == 2


def test_secondary_acceptance(tmp_path):
    """Figure series from the sync/async reference pair match the CSVs exactly
    and the async curve crosses 75% accuracy at a smaller time coordinate."""
    out = tmp_path / "comparison.svg"
    rc = main(["--inputs", str(ASYNC_CSV), str(SYNC_CSV),
               "--labels", "async", "sync", "--out", str(out)])
    ok = rc == 0 and out.exists() and out.stat().st_size > 0
    fig = plot_accuracy([ASYNC_CSV, SYNC_CSV], ["async", "sync"],
                        tmp_path / "again.svg")
    lines = fig.axes[0].get_lines()
    for line, path in zip(lines, (ASYNC_CSV, SYNC_CSV)):
        times, accs = read_columns(path)
        ok = ok and np.array_equal(line.get_xdata(), times) \
            and np.array_equal(line.get_ydata(), 100.0 * accs)
    t_async = lines[0].get_xdata()[np.flatnonzero(lines[0].get_ydata() >= 75.0)[0]]
    t_sync = lines[1].get_xdata()[np.flatnonzero(lines[1].get_ydata() >= 75.0)[0]]
    ok = ok and t_async < t_sync
    print(f"{'PASS' if ok else 'FAIL'}: plot command reproduces the CSV series "
          f"and async crosses 75% earlier (async {t_async:.0f} s < sync "
          f"{t_sync:.0f} s)")
    assert ok
