"""Render evcharge benchmark CSVs into ratio-CDF and parameter-sweep figures."""

from .errors import PlotIOError, SchemaMismatchError
from .figures import PlotJob, plot_cdf, plot_sweeps

__all__ = [
    "PlotJob",
    "PlotIOError",
    "SchemaMismatchError",
    "plot_cdf",
    "plot_sweeps",
]
