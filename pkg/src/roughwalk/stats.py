"""Mergeable streaming moments and fixed-range histograms.

Accumulators keep shifted power sums up to order four (shift = first sample
seen), which preserves precision on long streams; merging re-centers one
operand onto the other's shift, so any tree of merges reproduces the moments
of the concatenated sample up to roundoff.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import InsufficientCount


@dataclass
class CumulantSummary:
    mean: np.ndarray
    variance: np.ndarray
    third_cumulant: np.ndarray
    fourth_cumulant: np.ndarray
    kurtosis: np.ndarray          # m4 / m2^2, so a Gaussian gives 3
    covariance: np.ndarray


class MomentAccumulator:
    """Streaming moments of d-dimensional samples, orders 1-4 plus pairwise
    cross sums for the covariance matrix."""

    def __init__(self, dim: int):
        self.dim = dim
        self.count = 0
        self.shift = np.zeros(dim)
        self.power_sums = np.zeros((4, dim))   # sums of (x-shift)^k, k = 1..4
        self.cross = np.zeros((dim, dim))      # sums of (x_i-s_i)(x_j-s_j)

    def accumulate(self, sample) -> "MomentAccumulator":
        arr = np.asarray(sample, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.shape[1] != self.dim:
            raise ValueError(f"expected dimension {self.dim}, got {arr.shape[1]}")
        if self.count == 0 and arr.size:
            self.shift = arr[0].copy()
        x = arr - self.shift
        self.count += arr.shape[0]
        x2 = x * x
        self.power_sums[0] += x.sum(axis=0)
        self.power_sums[1] += x2.sum(axis=0)
        self.power_sums[2] += (x2 * x).sum(axis=0)
        self.power_sums[3] += (x2 * x2).sum(axis=0)
        self.cross += x.T @ x
        return self

    add = accumulate

    def _translated(self, new_shift: np.ndarray):
        """Power and cross sums re-expressed about new_shift."""
        delta = self.shift - new_shift
        n = self.count
        s = [np.full(self.dim, float(n)), *self.power_sums]  # s[k] = sum (x-shift)^k
        out = np.zeros((4, dim := self.dim))
        for k in range(1, 5):
            acc = np.zeros(dim)
            for j in range(k + 1):
                acc += comb(k, j) * delta ** (k - j) * s[j]
            out[k - 1] = acc
        cross = (self.cross + np.outer(delta, self.power_sums[0])
                 + np.outer(self.power_sums[0], delta) + n * np.outer(delta, delta))
        return out, cross

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Combined accumulator, equivalent to accumulating the concatenated
        stream; associative and commutative up to roundoff."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        if self.count == 0:
            return other._copy()
        if other.count == 0:
            return self._copy()
        merged = MomentAccumulator(self.dim)
        merged.count = self.count + other.count
        merged.shift = self.shift.copy()
        trans_pow, trans_cross = other._translated(self.shift)
        merged.power_sums = self.power_sums + trans_pow
        merged.cross = self.cross + trans_cross
        return merged

    def _copy(self) -> "MomentAccumulator":
        out = MomentAccumulator(self.dim)
        out.count = self.count
        out.shift = self.shift.copy()
        out.power_sums = self.power_sums.copy()
        out.cross = self.cross.copy()
        return out

    def mean(self) -> np.ndarray:
        if self.count == 0:
            raise InsufficientCount("empty accumulator")
        return self.shift + self.power_sums[0] / self.count

    def central_moments(self) -> np.ndarray:
        """Population central moments m1..m4, shape (4, d)."""
        if self.count == 0:
            raise InsufficientCount("empty accumulator")
        n = self.count
        m = self.power_sums[0] / n
        s2 = self.power_sums[1] / n
        s3 = self.power_sums[2] / n
        s4 = self.power_sums[3] / n
        m2 = s2 - m * m
        m3 = s3 - 3 * m * s2 + 2 * m ** 3
        m4 = s4 - 4 * m * s3 + 6 * m * m * s2 - 3 * m ** 4
        return np.stack([np.zeros_like(m), m2, m3, m4])

    def covariance(self) -> np.ndarray:
        if self.count == 0:
            raise InsufficientCount("empty accumulator")
        n = self.count
        m = self.power_sums[0] / n
        return self.cross / n - np.outer(m, m)

    def cumulants(self) -> CumulantSummary:
        """Per-coordinate cumulants and the covariance matrix.

        Kurtosis is the raw ratio m4/m2^2 (Gaussian -> 3); coordinates with
        zero variance get NaN kurtosis.
        """
        if self.count < 4:
            raise InsufficientCount(f"need at least 4 samples, have {self.count}")
        moments = self.central_moments()
        m2, m3, m4 = moments[1], moments[2], moments[3]
        with np.errstate(divide="ignore", invalid="ignore"):
            kurt = np.where(m2 > 0, m4 / np.where(m2 > 0, m2, 1.0) ** 2, np.nan)
        return CumulantSummary(
            mean=self.mean(),
            variance=m2,
            third_cumulant=m3,
            fourth_cumulant=m4 - 3 * m2 * m2,
            kurtosis=kurt,
            covariance=self.covariance(),
        )

    def write_csv(self, path) -> None:
        """One row per statistic: name, coordinate(s), value, std_error."""
        summary = self.cumulants()
        n = self.count
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "coordinate", "value", "std_error"])
            se_mean = np.sqrt(np.maximum(summary.variance, 0.0) / n)
            for i in range(self.dim):
                writer.writerow(["mean", i, repr(float(summary.mean[i])), repr(float(se_mean[i]))])
            for name, values in [("variance", summary.variance),
                                 ("third_cumulant", summary.third_cumulant),
                                 ("fourth_cumulant", summary.fourth_cumulant),
                                 ("kurtosis", summary.kurtosis)]:
                for i in range(self.dim):
                    writer.writerow([name, i, repr(float(values[i])), ""])
            for i in range(self.dim):
                for j in range(i + 1, self.dim):
                    writer.writerow(["covariance", f"{i}:{j}", repr(float(summary.covariance[i, j])), ""])


def cumulants(acc: MomentAccumulator) -> CumulantSummary:
    return acc.cumulants()


def accumulate(acc: MomentAccumulator, sample) -> MomentAccumulator:
    return acc.accumulate(sample)


class Histogram:
    """Fixed-range histogram with integer counts and under/overflow tallies."""

    def __init__(self, lower: float, upper: float, n_bins: int):
        if not upper > lower:
            raise ValueError("upper must exceed lower")
        if n_bins < 1:
            raise ValueError("need at least one bin")
        self.lower = float(lower)
        self.upper = float(upper)
        self.n_bins = int(n_bins)
        self.counts = np.zeros(n_bins, dtype=np.int64)
        self.underflow = 0
        self.overflow = 0

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.n_bins + 1)

    def accumulate(self, values) -> "Histogram":
        arr = np.asarray(values, dtype=np.float64).ravel()
        self.underflow += int((arr < self.lower).sum())
        self.overflow += int((arr >= self.upper).sum())
        inside = arr[(arr >= self.lower) & (arr < self.upper)]
        counts, _ = np.histogram(inside, bins=self.n_bins, range=(self.lower, self.upper))
        self.counts += counts
        return self

    def merge(self, other: "Histogram") -> "Histogram":
        if (self.lower, self.upper, self.n_bins) != (other.lower, other.upper, other.n_bins):
            raise ValueError("histogram ranges differ")
        out = Histogram(self.lower, self.upper, self.n_bins)
        out.counts = self.counts + other.counts
        out.underflow = self.underflow + other.underflow
        out.overflow = self.overflow + other.overflow
        return out

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def write_csv(self, path) -> None:
        edges = self.edges
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_left", "bin_right", "count"])
            for i in range(self.n_bins):
                writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])), int(self.counts[i])])
