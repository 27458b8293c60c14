"""Figure rendering from roughwalk histogram CSVs.

Reads only CSV files (schema: bin_left,bin_right,count) and never invokes the
simulator.  Up to four histogram panels are drawn into one figure, optionally
overlaid with the standard normal density scaled to each panel's bin mass; a
caption line under the panels prints every panel's total count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

HIST_COLUMNS = ("bin_left", "bin_right", "count")
MAX_PANELS = 4


class SchemaError(ValueError):
    """Input CSV does not follow the histogram schema."""

    def __init__(self, path, column, detail):
        self.path = path
        self.column = column
        super().__init__(f"{path}: column {column!r} {detail}")


@dataclass(frozen=True)
class HistogramData:
    name: str
    edges: np.ndarray      # (n_bins + 1,)
    counts: np.ndarray     # (n_bins,) integers

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class PlotSpec:
    """What to render: input histogram CSVs, the image path, panel titles,
    and whether to overlay the standard normal density."""

    inputs: tuple
    out_path: str
    titles: tuple = ()
    overlay_normal: bool = False

    def __post_init__(self):
        if not 1 <= len(self.inputs) <= MAX_PANELS:
            raise ValueError(f"need between 1 and {MAX_PANELS} input CSVs, got {len(self.inputs)}")
        for path in self.inputs:
            if not Path(path).exists():
                raise FileNotFoundError(path)


@dataclass(frozen=True)
class RenderSummary:
    out_path: str
    panel_totals: dict
    caption: str


def read_histogram_csv(path) -> HistogramData:
    """Parse one histogram CSV, validating the schema column by column."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(path, None, "file is empty (expected a header row)")
    header = tuple(h.strip() for h in rows[0])
    if header != HIST_COLUMNS:
        offending = next((h for h in header if h not in HIST_COLUMNS), None)
        if offending is None:  # right names, wrong order or missing columns
            offending = ",".join(header)
        raise SchemaError(path, offending, f"unexpected; header must be {','.join(HIST_COLUMNS)}")

    lefts, rights, counts = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        for col, value in zip(HIST_COLUMNS, row):
            try:
                if col == "count":
                    count = int(value)
                else:
                    float(value)
            except ValueError:
                raise SchemaError(path, col, f"unparseable value {value!r} on line {lineno}") from None
        if int(row[2]) < 0:
            raise SchemaError(path, "count", f"negative on line {lineno}")
        lefts.append(float(row[0]))
        rights.append(float(row[1]))
        counts.append(int(row[2]))

    if lefts:
        edges = np.concatenate([lefts, rights[-1:]])
        if not np.all(np.diff(edges) > 0) or not np.allclose(lefts[1:], rights[:-1]):
            raise SchemaError(path, "bin_left", "bins are not contiguous increasing intervals")
    else:
        edges = np.array([0.0, 1.0])
        counts = [0]
    return HistogramData(name=Path(path).stem, edges=edges, counts=np.asarray(counts, dtype=np.int64))


def _draw_panel(ax, hist: HistogramData, title: str, overlay: bool) -> None:
    widths = np.diff(hist.edges)
    ax.bar(hist.edges[:-1], hist.counts, width=widths, align="edge",
           color="#4878a8", edgecolor="none")
    ax.set_title(title, fontsize=9)
    ax.tick_params(labelsize=7)
    if overlay and hist.total > 0:
        xs = np.linspace(hist.edges[0], hist.edges[-1], 400)
        density = np.exp(-0.5 * xs * xs) / np.sqrt(2 * np.pi)
        # scale to the drawn mass: counts integrate to total * mean bin width
        ax.plot(xs, density * hist.total * widths.mean(), color="#a83838", linewidth=1.0)


def render_histograms(spec: PlotSpec) -> RenderSummary:
    """Render the panels of `spec` into one image.

    Deterministic for fixed inputs; the caption line below the panels states
    each panel's total bin mass, which equals the sum of its CSV count column.
    """
    histograms = [read_histogram_csv(path) for path in spec.inputs]
    titles = list(spec.titles) + [h.name for h in histograms[len(spec.titles):]]

    n = len(histograms)
    ncols = 2 if n > 1 else 1
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(4.2 * ncols, 3.2 * nrows), squeeze=False)
    for k, hist in enumerate(histograms):
        _draw_panel(axes[k // ncols][k % ncols], hist, titles[k], spec.overlay_normal)
    for k in range(n, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")

    caption = "; ".join(f"{titles[k]}: N = {hist.total}" for k, hist in enumerate(histograms))
    fig.suptitle("")
    fig.text(0.01, 0.005, caption, fontsize=7)
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    fig.savefig(spec.out_path, dpi=110, metadata={"Software": "roughwalk-plots"})
    plt.close(fig)

    return RenderSummary(
        out_path=str(spec.out_path),
        panel_totals={titles[k]: hist.total for k, hist in enumerate(histograms)},
        caption=caption,
    )
