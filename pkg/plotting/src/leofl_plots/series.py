"""Metrics-CSV reading: one accuracy-over-time series per run output."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

REQUIRED_COLUMNS = ("sim_time_s", "test_accuracy")


class SchemaError(ValueError):
    """The CSV does not carry the simulator's metrics schema."""


@dataclass(frozen=True)
class Series:
    label: str
    times: np.ndarray          # seconds, sorted ascending
    accuracies: np.ndarray     # fractions in [0, 1]

    def __post_init__(self) -> None:
        if self.times.shape != self.accuracies.shape:
            raise ValueError("times and accuracies must align")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("series rows must be time-sorted")
        if self.accuracies.size and (self.accuracies.min() < 0
                                     or self.accuracies.max() > 1):
            raise ValueError("accuracy values must lie in [0, 1]")

    def crossing_time(self, target: float) -> float | None:
        """Earliest time the series reaches `target` accuracy."""
        hits = np.flatnonzero(self.accuracies >= target)
        return float(self.times[hits[0]]) if hits.size else None


def load_series(path: str | Path, label: str | None = None) -> Series:
    """Read (sim_time_s, test_accuracy) rows from one metrics CSV."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise SchemaError(f"{path}: missing required column {column!r}")
        times, accs = [], []
        for row in reader:
            times.append(float(row["sim_time_s"]))
            accs.append(float(row["test_accuracy"]))
    return Series(label=label if label is not None else path.stem,
                  times=np.asarray(times), accuracies=np.asarray(accs))


def moving_average(series: Series, window: int) -> Series:
    """Centered-start moving average over `window` rows (window <= 1 is a no-op)."""
    if window <= 1:
        return series
    kernel = np.ones(window) / window
    smoothed = np.convolve(series.accuracies, kernel, mode="valid")
    offset = window - 1
    return Series(label=series.label, times=series.times[offset:],
                  accuracies=smoothed)
