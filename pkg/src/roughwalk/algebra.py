"""Level-2 rough-path algebra.

Elements carry a d-vector increment and an antisymmetric d x d signed-area
matrix.  The signed area of a discrete path is

    A[i][j] = 1/2 * sum_{k<l} (dx_k^i dx_l^j - dx_k^j dx_l^i),

the 1/2 convention being used everywhere in this package.  The group product
(Chen product) concatenates paths; the dilation scales the two levels by eps
and eps^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfRange


def pair_indices(d: int) -> list[tuple[int, int]]:
    """Index pairs (i, j), i < j, in row-major order; the storage layout for
    antisymmetric matrices."""
    return [(i, j) for i in range(d) for j in range(i + 1, d)]


def upper_to_matrix(upper: np.ndarray, d: int) -> np.ndarray:
    """Full antisymmetric matrix from its strict upper triangle."""
    a = np.zeros((d, d))
    for idx, (i, j) in enumerate(pair_indices(d)):
        a[i, j] = upper[idx]
        a[j, i] = -upper[idx]
    return a


def matrix_to_upper(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    d = a.shape[0]
    return np.array([a[i, j] for i, j in pair_indices(d)])


@dataclass(frozen=True)
class RoughPoint:
    """Group element (increment, signed area).

    The area is stored as its strict upper triangle, so antisymmetry is exact
    by construction; `level2` materializes the full matrix.
    """

    level1: np.ndarray
    level2_upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "level1", np.asarray(self.level1, dtype=np.float64))
        object.__setattr__(self, "level2_upper", np.asarray(self.level2_upper, dtype=np.float64))
        d = self.level1.shape[0]
        if self.level2_upper.shape != (d * (d - 1) // 2,):
            raise ValueError("level2_upper has wrong length for the dimension")

    @classmethod
    def from_matrix(cls, level1, level2) -> "RoughPoint":
        level2 = np.asarray(level2, dtype=np.float64)
        if not np.allclose(level2, -level2.T, atol=1e-9 * max(1.0, float(np.abs(level2).max(initial=0.0)))):
            raise ValueError("level2 must be antisymmetric")
        return cls(np.asarray(level1, dtype=np.float64), matrix_to_upper(level2))

    @classmethod
    def identity(cls, d: int) -> "RoughPoint":
        return cls(np.zeros(d), np.zeros(d * (d - 1) // 2))

    @property
    def dim(self) -> int:
        return self.level1.shape[0]

    @property
    def level2(self) -> np.ndarray:
        return upper_to_matrix(self.level2_upper, self.dim)

    def to_json_dict(self) -> dict:
        return {
            "level1": self.level1.tolist(),
            "level2_upper_triangle": self.level2_upper.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "RoughPoint":
        return cls(np.asarray(data["level1"]), np.asarray(data["level2_upper_triangle"]))


def discrete_area(points) -> np.ndarray:
    """Signed area matrix of a discrete path, O(n d^2).

    Uses the running-position update A += 1/2 (x_prev ^ dx) rather than the
    quadratic double sum over increment pairs; the two agree exactly for
    integer paths.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a sequence of vectors")
    n, d = pts.shape
    if n < 1:
        raise ValueError("need at least one point")
    rel = pts - pts[0]
    a = np.zeros((d, d))
    if n == 1:
        return a
    deltas = np.diff(rel, axis=0)
    prev = rel[:-1]
    # sum_k x_{k-1}^i dx_k^j as a d x d Gram product, antisymmetrized
    g = prev.T @ deltas
    a = 0.5 * (g - g.T)
    return a


def area_sequence(points) -> np.ndarray:
    """Prefix areas A_0..A_n of a path, shape (n+1, d, d)."""
    pts = np.asarray(points, dtype=np.float64)
    n, d = pts.shape[0] - 1, pts.shape[1]
    rel = pts - pts[0]
    out = np.zeros((n + 1, d, d))
    if n == 0:
        return out
    deltas = np.diff(rel, axis=0)
    prev = rel[:-1]
    # per-step antisymmetric contributions, then prefix sums
    contrib = 0.5 * (prev[:, :, None] * deltas[:, None, :] - deltas[:, :, None] * prev[:, None, :])
    out[1:] = np.cumsum(contrib, axis=0)
    return out


def chen_product(a: RoughPoint, b: RoughPoint) -> RoughPoint:
    """Group product: level1 adds, level2 adds plus the cross area of the
    concatenation, 1/2 (a1 ^ b1)."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    level1 = a.level1 + b.level1
    pairs = pair_indices(a.dim)
    cross = np.array([0.5 * (a.level1[i] * b.level1[j] - a.level1[j] * b.level1[i]) for i, j in pairs])
    return RoughPoint(level1, a.level2_upper + b.level2_upper + cross)


def dilate(a: RoughPoint, eps: float) -> RoughPoint:
    """Homogeneous dilation: level1 scales by eps, level2 by eps^2."""
    return RoughPoint(eps * a.level1, (eps * eps) * a.level2_upper)


def homogeneous_norm(a: RoughPoint) -> float:
    """max(|level1|, |level2|_op^(1/2)); homogeneous of degree 1 under dilation
    and zero exactly at the identity.

    For an antisymmetric matrix the operator 2-norm is its largest singular
    value.  This is an equivalent substitute for the geodesic norm, whose
    exact value is never needed here.
    """
    n1 = float(np.linalg.norm(a.level1))
    if a.level2_upper.size == 0:
        return n1
    if not np.any(a.level2_upper):
        n2 = 0.0
    else:
        n2 = float(np.linalg.norm(a.level2, 2)) ** 0.5
    return max(n1, n2)


def area_linear_transform(A: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Area of the linearly mapped path: M @ A @ M.T.

    Matches discrete_area applied to the pointwise-mapped path up to floating
    point roundoff.
    """
    A = np.asarray(A, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if A.shape[0] != A.shape[1] or M.shape[1] != A.shape[0]:
        raise ValueError("shape mismatch between A and M")
    return M @ A @ M.T


@dataclass(frozen=True)
class EmbeddedPath:
    """Piecewise-linear rescaled lift of a discrete path.

    At scale N the position is interpolated between base points and divided
    by sqrt(N); the area is interpolated between prefix areas and divided by
    N.  Evaluation requires N*t <= len(base) - 1.
    """

    N: int
    base: np.ndarray
    areas: np.ndarray

    @classmethod
    def from_points(cls, points, N: int) -> "EmbeddedPath":
        pts = np.asarray(points, dtype=np.float64)
        return cls(N=N, base=pts, areas=area_sequence(pts))

    def __call__(self, t: float) -> RoughPoint:
        return donsker_embed(self.base, self.areas, self.N, t)


def donsker_embed(base, areas, N: int, t: float) -> RoughPoint:
    """Evaluate the rescaled piecewise-linear lift at time t.

    level1 = (x_k + frac * (x_{k+1} - x_k)) / sqrt(N)
    level2 = (A_k + frac * (A_{k+1} - A_k)) / N
    with k = floor(N t); `areas` must hold the prefix areas of `base`.
    """
    base = np.asarray(base, dtype=np.float64)
    areas = np.asarray(areas, dtype=np.float64)
    if t < 0:
        raise OutOfRange(f"negative time {t}")
    s = N * t
    last = base.shape[0] - 1
    if s > last * (1 + 1e-12) + 1e-12:
        raise OutOfRange(f"N*t = {s} exceeds the last index {last}")
    k = min(int(np.floor(s)), last)
    frac = s - k
    if k == last:  # right endpoint, nothing to interpolate
        x = base[k]
        a = areas[k]
    else:
        x = base[k] + frac * (base[k + 1] - base[k])
        a = areas[k] + frac * (areas[k + 1] - areas[k])
    return RoughPoint.from_matrix(x / np.sqrt(N), a / N)
