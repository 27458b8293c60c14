import numpy as np
import pytest

from plot_helpers import write_hist_csv


@pytest.fixture
def gaussian_hist(tmp_path):
    gen = np.random.default_rng(1)
    edges = np.linspace(-4, 4, 41)
    counts, _ = np.histogram(gen.normal(size=5000), bins=edges)
    return write_hist_csv(tmp_path / "gauss.csv", edges, counts)
