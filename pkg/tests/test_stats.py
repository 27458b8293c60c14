import csv

import numpy as np
import pytest

from roughwalk import rng
from roughwalk.engine import sample_terminal_ensemble
from roughwalk.errors import InsufficientCount
from roughwalk.graph import rotating_model
from roughwalk.stats import Histogram, MomentAccumulator


class TestMoments:
    def test_constant_stream(self):
        acc = MomentAccumulator(2)
        acc.accumulate(np.tile([3.5, -1.0], (1000, 1)))
        summary = acc.cumulants()
        assert np.array_equal(summary.mean, [3.5, -1.0])
        assert np.array_equal(summary.variance, [0.0, 0.0])
        assert np.isnan(summary.kurtosis).all()

    def test_merge_equals_concatenation(self):
        gen = np.random.default_rng(20)
        data = gen.normal(size=(5000, 3)) * [1.0, 2.0, 0.3] + [0.0, -4.0, 10.0]
        whole = MomentAccumulator(3).accumulate(data)
        left = MomentAccumulator(3).accumulate(data[:1234])
        right = MomentAccumulator(3).accumulate(data[1234:])
        merged = left.merge(right)
        a, b = whole.cumulants(), merged.cumulants()
        for name in ("mean", "variance", "third_cumulant", "fourth_cumulant", "kurtosis"):
            lhs, rhs = getattr(a, name), getattr(b, name)
            assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-12)
        assert np.allclose(a.covariance, b.covariance, rtol=1e-10, atol=1e-12)

    def test_merge_associative_and_commutative(self):
        gen = np.random.default_rng(21)
        chunks = [MomentAccumulator(2).accumulate(gen.normal(size=(n, 2)) + s)
                  for n, s in ((100, 0.0), (300, 2.0), (50, -1.0))]
        abc = chunks[0].merge(chunks[1]).merge(chunks[2])
        a_bc = chunks[0].merge(chunks[1].merge(chunks[2]))
        cba = chunks[2].merge(chunks[1]).merge(chunks[0])
        for other in (a_bc, cba):
            assert np.allclose(abc.cumulants().variance, other.cumulants().variance, rtol=1e-10)
            assert np.allclose(abc.cumulants().fourth_cumulant, other.cumulants().fourth_cumulant,
                               rtol=1e-9, atol=1e-12)

    def test_gaussian_kurtosis(self):
        gen = rng.stream_generator(7, 0, rng.GENERIC)
        acc = MomentAccumulator(1)
        acc.accumulate(gen.standard_normal((1_000_000, 1)))
        kurt = acc.cumulants().kurtosis[0]
        assert 2.98 <= kurt <= 3.02

    def test_balanced_two_point_sample(self):
        acc = MomentAccumulator(1)
        acc.accumulate(np.array([[1.0], [-1.0]] * 500))
        summary = acc.cumulants()
        assert summary.mean[0] == 0.0
        assert summary.variance[0] == 1.0
        assert summary.kurtosis[0] == 1.0

    def test_shift_invariance(self):
        gen = np.random.default_rng(22)
        data = gen.normal(size=(4000, 2))
        base = MomentAccumulator(2).accumulate(data).cumulants()
        shifted = MomentAccumulator(2).accumulate(data + [100.0, -250.0]).cumulants()
        for name in ("variance", "third_cumulant", "fourth_cumulant", "kurtosis"):
            assert np.allclose(getattr(base, name), getattr(shifted, name), rtol=1e-10, atol=1e-10)

    def test_rotating_normalized_coordinate_variance(self):
        # coordinate of the rotating walk over n steps, divided by
        # sqrt(2 n p (1-p)), has variance close to 1
        p, n, realizations = 0.9, 2_500, 40_000
        pos, _ = sample_terminal_ensemble(rotating_model(p), 0, n, realizations, seed=23)
        samples = pos / np.sqrt(2 * n * p * (1 - p))
        acc = MomentAccumulator(2).accumulate(samples)
        var = acc.cumulants().variance
        assert np.all(np.abs(var - 1.0) < 0.02)

    def test_insufficient_count(self):
        acc = MomentAccumulator(1).accumulate([[1.0], [2.0], [3.0]])
        with pytest.raises(InsufficientCount):
            acc.cumulants()

    def test_csv_output(self, tmp_path):
        acc = MomentAccumulator(2).accumulate(np.random.default_rng(3).normal(size=(100, 2)))
        path = tmp_path / "moments.csv"
        acc.write_csv(path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["name", "coordinate", "value", "std_error"]
        names = {row[0] for row in rows[1:]}
        assert names == {"mean", "variance", "third_cumulant", "fourth_cumulant",
                         "kurtosis", "covariance"}


class TestHistogram:
    def test_mass_conserved_exactly(self):
        gen = np.random.default_rng(24)
        hist = Histogram(-2.0, 2.0, 40)
        data = gen.normal(size=10_000)
        hist.accumulate(data)
        assert hist.total == 10_000
        assert hist.counts.sum() + hist.underflow + hist.overflow == 10_000

    def test_merge(self):
        gen = np.random.default_rng(25)
        a = Histogram(-1.0, 1.0, 10).accumulate(gen.uniform(-2, 2, 500))
        b = Histogram(-1.0, 1.0, 10).accumulate(gen.uniform(-2, 2, 700))
        merged = a.merge(b)
        assert merged.total == 1200
        assert np.array_equal(merged.counts, a.counts + b.counts)

    def test_merge_range_mismatch(self):
        with pytest.raises(ValueError):
            Histogram(0, 1, 10).merge(Histogram(0, 2, 10))

    def test_boundary_values(self):
        hist = Histogram(0.0, 1.0, 2).accumulate([0.0, 0.5, 1.0, -0.001])
        assert hist.underflow == 1
        assert hist.overflow == 1
        assert np.array_equal(hist.counts, [1, 1])

    def test_csv(self, tmp_path):
        hist = Histogram(0.0, 1.0, 4).accumulate([0.1, 0.3, 0.9])
        path = tmp_path / "hist.csv"
        hist.write_csv(path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["bin_left", "bin_right", "count"]
        assert len(rows) == 5
        assert sum(int(r[2]) for r in rows[1:]) == 3
