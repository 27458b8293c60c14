"""Histogram figure rendering for roughwalk CSV outputs."""

from .render import (HistogramData, PlotSpec, RenderSummary, SchemaError,
                     read_histogram_csv, render_histograms)

__version__ = "0.1.0"

__all__ = ["HistogramData", "PlotSpec", "RenderSummary", "SchemaError",
           "read_histogram_csv", "render_histograms"]
