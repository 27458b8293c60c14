"""End-to-end: consume real simulator CSVs through the CLI file interface."""

import csv
import subprocess
import sys

import pytest

from plot_helpers import strip_png_metadata
from roughwalk_plots import PlotSpec, render_histograms


def run_simulate(out_dir, p, seed):
    cmd = [sys.executable, "-m", "roughwalk.cli", "simulate", "--model", "rotating",
           "--p", str(p), "--steps", "2000", "--trajectories", "4000",
           "--seed", str(seed), "--out", str(out_dir)]
    return subprocess.run(cmd, capture_output=True, text=True)


@pytest.fixture(scope="module")
def simulator_csvs(tmp_path_factory):
    pytest.importorskip("roughwalk", reason="the simulator package is not installed")
    base = tmp_path_factory.mktemp("sim")
    anomalous = base / "p09"
    plain = base / "p05"
    for directory, p, seed in ((anomalous, 0.9, 7), (plain, 0.5, 7)):
        result = run_simulate(directory, p, seed)
        assert result.returncode == 0, result.stderr
    return anomalous, plain


def weighted_mean(csv_path):
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    total = sum(int(r["count"]) for r in rows)
    mids = sum(0.5 * (float(r["bin_left"]) + float(r["bin_right"])) * int(r["count"]) for r in rows)
    return mids / total, total


class TestFourPanelFigure:
    def test_render_and_totals(self, simulator_csvs, tmp_path):
        anomalous, plain = simulator_csvs
        inputs = (
            str(anomalous / "hist_coord_0.csv"),
            str(anomalous / "hist_coord_1.csv"),
            str(anomalous / "hist_area_0_1.csv"),
            str(plain / "hist_area_0_1.csv"),
        )
        out = tmp_path / "rotating.png"
        summary = render_histograms(PlotSpec(
            inputs=inputs, out_path=str(out),
            titles=("coordinate x", "coordinate y", "area (p=0.9)", "area (p=0.5)"),
            overlay_normal=True))
        assert out.exists()
        for path, title in zip(inputs, summary.panel_totals):
            with open(path) as fh:
                csv_total = sum(int(row["count"]) for row in csv.DictReader(fh))
            assert summary.panel_totals[title] == csv_total

    def test_panels_center_where_expected(self, simulator_csvs):
        anomalous, plain = simulator_csvs
        coord_mean, total = weighted_mean(anomalous / "hist_coord_0.csv")
        assert total > 0
        assert abs(coord_mean) < 0.1
        area_mean, _ = weighted_mean(anomalous / "hist_area_0_1.csv")
        assert abs(abs(area_mean) - 8.0 / 9.0) < 0.1
        plain_mean, _ = weighted_mean(plain / "hist_area_0_1.csv")
        assert abs(plain_mean) < 0.1

    def test_figure_bytes_deterministic(self, simulator_csvs, tmp_path):
        anomalous, _ = simulator_csvs
        inputs = (str(anomalous / "hist_coord_0.csv"), str(anomalous / "hist_area_0_1.csv"))
        images = []
        for name in ("one.png", "two.png"):
            out = tmp_path / name
            render_histograms(PlotSpec(inputs=inputs, out_path=str(out), overlay_normal=True))
            images.append(strip_png_metadata(out.read_bytes()))
        assert images[0] == images[1]
