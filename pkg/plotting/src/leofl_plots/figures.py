"""Accuracy-vs-time comparison figures in the percent-scaled house style."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .series import load_series, moving_average

TIME_DIVISORS = {"s": 1.0, "h": 3600.0}


def plot_accuracy(inputs: Sequence[str | Path], labels: Sequence[str] | None,
                  out_path: str | Path, time_unit: str = "s",
                  smooth: int = 0) -> plt.Figure:
    """Render one accuracy (%) vs. simulated-time line per input CSV.

    The plotted arrays are exactly the CSV contents unless `smooth` sets a
    moving-average window. The figure is written to `out_path` (format from
    the extension; vector formats recommended) and returned for inspection.
    """
    if not inputs:
        raise ValueError("at least one metrics CSV is required")
    if time_unit not in TIME_DIVISORS:
        raise ValueError(f"time unit must be one of {sorted(TIME_DIVISORS)}")
    if labels is not None and len(labels) != len(inputs):
        raise ValueError(f"{len(inputs)} inputs but {len(labels)} labels")
    divisor = TIME_DIVISORS[time_unit]

    series = []
    for i, path in enumerate(inputs):
        s = load_series(path, labels[i] if labels else None)
        if smooth > 1:
            s = moving_average(s, smooth)
        series.append(s)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for s in series:
        ax.plot(s.times / divisor, 100.0 * s.accuracies, marker="o",
                markersize=3.5, linewidth=1.4, label=s.label)
    ax.set_xlabel(f"Simulated time ({time_unit})")
    ax.set_ylabel("Accuracy (%)")
    ax.set_ylim(0.0, 100.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path)
    return fig
