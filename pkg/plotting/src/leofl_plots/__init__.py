"""Comparison figures for simulator metrics: accuracy vs. simulated time."""

from .series import Series, SchemaError, load_series, moving_average
from .figures import plot_accuracy

__version__ = "0.1.0"
