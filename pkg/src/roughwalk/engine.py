"""Vectorized lockstep simulation.

Many trajectories advance one step per iteration with numpy doing the work
across the whole ensemble.  Stream keys are assigned per trajectory column
(excursion harvesting) or per fixed-size shard of 256 columns (terminal
ensembles), so results never depend on ensemble grouping or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .algebra import pair_indices
from .graph import PeriodicGraphModel
from .sampler import CellTables

ENSEMBLE_SHARD = 256

# fixed probe drift for the per-excursion two-route area identity check; the
# identity holds for every vector, so any nonzero choice exercises it
_PROBE = np.array([0.37, -0.61, 0.24, -0.18, 0.42, -0.33, 0.29, -0.11])

ROUTE_CHECK_RTOL = 1e-10


@dataclass(frozen=True)
class DenseTables:
    """Padded per-cell transition tables for vectorized stepping."""

    cdf: np.ndarray       # (n_cells, K) cumulative probs, padded with +inf
    incr: np.ndarray      # (n_cells * K, d) embedded increments
    to_cell: np.ndarray   # (n_cells * K,) target cells
    n_trans: np.ndarray   # (n_cells,) true row lengths
    K: int

    @classmethod
    def build(cls, model: PeriodicGraphModel) -> "DenseTables":
        tables = CellTables.build(model)
        n_cells, d = model.n_cells, model.dim_E
        K = max(arr.size for arr in tables.cumprob)
        cdf = np.full((n_cells, K), np.inf)
        incr = np.zeros((n_cells * K, d))
        to_cell = np.zeros(n_cells * K, dtype=np.int64)
        n_trans = np.zeros(n_cells, dtype=np.int64)
        for c in range(n_cells):
            k = tables.cumprob[c].size
            cdf[c, :k] = tables.cumprob[c]
            incr[c * K:c * K + k] = tables.increment[c]
            to_cell[c * K:c * K + k] = tables.to_cell[c]
            n_trans[c] = k
        return cls(cdf=cdf, incr=incr, to_cell=to_cell, n_trans=n_trans, K=K)


def _select(tables: DenseTables, cells: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF transition index per column (model order, same tie-break
    as the scalar sampler)."""
    k = (u[:, None] >= tables.cdf[cells]).sum(axis=1)
    return np.minimum(k, tables.n_trans[cells] - 1)


class StepKernel:
    """Allocation-free lockstep step: selects transitions by inverse CDF and
    writes the embedded increments into preallocated buffers.

    The state it advances is `cells` (int64, owned by the caller) and the
    increment columns `dx[i]`; all temporaries are reused across steps.
    """

    def __init__(self, model: PeriodicGraphModel, width: int):
        tables = DenseTables.build(model)
        self.K = tables.K
        self.d = model.dim_E
        self.to_cell = tables.to_cell
        self.cdf_cols = [np.ascontiguousarray(tables.cdf[:, j]) for j in range(tables.K)]
        self.incr_cols = [np.ascontiguousarray(tables.incr[:, i]) for i in range(self.d)]
        self.nt_minus_1 = tables.n_trans - 1
        self.dx = [np.empty(width) for _ in range(self.d)]
        self._k = np.empty(width, dtype=np.int64)
        self._ki = np.empty(width, dtype=np.int64)
        self._sel = np.empty(width, dtype=np.int64)
        self._t = np.empty(width)
        self._b = np.empty(width, dtype=bool)

    def advance(self, u: np.ndarray, cells: np.ndarray) -> None:
        """One step for every column: consumes one uniform per column, fills
        self.dx with the increments, and updates `cells` in place."""
        k, t, b = self._k, self._t, self._b
        np.take(self.cdf_cols[0], cells, out=t)
        np.greater_equal(u, t, out=b)
        np.copyto(k, b, casting="unsafe")
        for j in range(1, self.K - 1):
            np.take(self.cdf_cols[j], cells, out=t)
            np.greater_equal(u, t, out=b)
            k += b
        np.take(self.nt_minus_1, cells, out=self._ki)
        np.minimum(k, self._ki, out=k)
        np.multiply(cells, self.K, out=self._sel)
        self._sel += k
        for i in range(self.d):
            np.take(self.incr_cols[i], self._sel, out=self.dx[i])
        np.take(self.to_cell, self._sel, out=cells)


class AreaTracker:
    """In-place signed-area accumulation A += 1/2 (x ^ dx) for a lockstep
    ensemble; also advances the positions."""

    def __init__(self, d: int, width: int):
        self.pairs = pair_indices(d)
        self.x = [np.zeros(width) for _ in range(d)]
        self.area = [np.zeros(width) for _ in range(len(self.pairs))]
        self._t1 = np.empty(width)
        self._t2 = np.empty(width)

    def update(self, dx: list[np.ndarray]) -> None:
        t1, t2 = self._t1, self._t2
        for p, (i, j) in enumerate(self.pairs):
            np.multiply(self.x[i], dx[j], out=t1)
            np.multiply(self.x[j], dx[i], out=t2)
            t1 -= t2
            t1 *= 0.5
            self.area[p] += t1
        for i, xi in enumerate(self.x):
            xi += dx[i]

    def reset_columns(self, idx: np.ndarray) -> None:
        for xi in self.x:
            xi[idx] = 0.0
        for ap in self.area:
            ap[idx] = 0.0

    def positions(self) -> np.ndarray:
        return np.column_stack(self.x)

    def areas(self) -> np.ndarray:
        return np.column_stack(self.area)


class _ColumnUniforms:
    """Blocked uniforms for lockstep columns, one stream per column."""

    def __init__(self, seed: int, stream_ids, block: int = 4096):
        self._gens = [rng.stream_generator(seed, int(s), rng.TRAJECTORY) for s in stream_ids]
        self._block = block
        self._buf = None
        self._pos = block

    def next_row(self) -> np.ndarray:
        if self._pos >= self._block:
            cols = [g.random(self._block) for g in self._gens]
            self._buf = np.column_stack(cols)
            self._pos = 0
        row = self._buf[self._pos]
        self._pos += 1
        return row


class ShardUniforms:
    """Blocked uniforms for terminal ensembles, one stream per 256-column
    shard; `base_stream` offsets the shard keys so a worker holding shards
    [s0, s1) reproduces exactly the columns it would own in a single run."""

    def __init__(self, seed: int, n_columns: int, base_stream: int, block: int,
                 purpose: int = rng.ENSEMBLE):
        self._n = n_columns
        self._block = block
        shards = (n_columns + ENSEMBLE_SHARD - 1) // ENSEMBLE_SHARD
        self._gens = [rng.stream_generator(seed, base_stream + s, purpose) for s in range(shards)]
        self._buf = np.empty((block, n_columns))
        self._pos = block

    def next_row(self) -> np.ndarray:
        if self._pos >= self._block:
            for s, g in enumerate(self._gens):
                lo = s * ENSEMBLE_SHARD
                hi = min(lo + ENSEMBLE_SHARD, self._n)
                self._buf[:, lo:hi] = g.random((self._block, hi - lo))
            self._pos = 0
        row = self._buf[self._pos]
        self._pos += 1
        return row


def _ensemble_block(n_columns: int) -> int:
    # keep the uniform buffer around 32 MB
    return int(min(4096, max(64, (32 << 20) // (8 * max(n_columns, 1)))))


@dataclass
class HarvestColumn:
    """Per-excursion samples harvested from one trajectory stream."""

    stream: int
    length: np.ndarray        # (q,) int64
    displacement: np.ndarray  # (q, d)
    area: np.ndarray          # (q, P) upper-triangle pairs
    corr_weight: np.ndarray   # (q, d)   W = sum_m (2m-1-L) dx_m
    max_route_err: float


def harvest_excursions(model: PeriodicGraphModel, start_cell: int, quotas, seed: int,
                       stream_ids, increment_bound: float) -> list[HarvestColumn]:
    """Collect the first quotas[s] complete excursions of each stream.

    All streams advance in lockstep.  For every harvested excursion the signed
    area is accumulated twice, once on the raw increments and once on probe-
    centered increments, and the two routes to the drift correction term are
    checked against each other at ROUTE_CHECK_RTOL.  The componentwise bound
    |area| <= d R^2 L^2 is also enforced.
    """
    d = model.dim_E
    pairs = pair_indices(d)
    P = len(pairs)
    quotas = np.asarray(quotas, dtype=np.int64)
    width = len(stream_ids)
    kernel = StepKernel(model, width)
    v_probe = increment_bound * _PROBE[:d] if increment_bound > 0 else _PROBE[:d].copy()

    offsets = np.concatenate(([0], np.cumsum(quotas)))
    total = int(offsets[-1])
    flat_L = np.zeros(total, dtype=np.int64)
    flat_disp = np.zeros((total, d))
    flat_area = np.zeros((total, P))
    flat_w = np.zeros((total, d))
    write_pos = offsets[:-1].copy()

    cells = np.full(width, start_cell, dtype=np.int64)
    tracker = AreaTracker(d, width)
    area_c = [np.zeros(width) for _ in range(P)]   # probe-centered route
    s1 = [np.zeros(width) for _ in range(d)]       # sum_m m * dx_m
    length = np.zeros(width, dtype=np.int64)
    count = np.zeros(width, dtype=np.int64)
    xc = np.empty(width)
    dxc = [np.empty(width) for _ in range(d)]
    t1, t2 = np.empty(width), np.empty(width)

    uniforms = _ColumnUniforms(seed, stream_ids)
    max_route_err = np.zeros(width)
    bound_k = d * increment_bound ** 2

    active = count < quotas
    while active.any():
        u = uniforms.next_row()
        kernel.advance(u, cells)
        dx = kernel.dx
        # probe-centered area: contributions use x - length * v_probe and
        # dx - v_probe
        for i in range(d):
            np.subtract(dx[i], v_probe[i], out=dxc[i])
        for p, (i, j) in enumerate(pairs):
            np.multiply(length, -v_probe[i], out=xc)
            xc += tracker.x[i]
            np.multiply(xc, dxc[j], out=t1)
            np.multiply(length, -v_probe[j], out=xc)
            xc += tracker.x[j]
            np.multiply(xc, dxc[i], out=t2)
            t1 -= t2
            t1 *= 0.5
            area_c[p] += t1
        tracker.update(dx)
        length += 1
        for i in range(d):
            np.multiply(length, dx[i], out=t1)
            s1[i] += t1

        done = (cells == start_cell) & active
        if done.any():
            idx = np.flatnonzero(done)
            L = length[idx]
            disp = np.column_stack([xi[idx] for xi in tracker.x])
            a_u = np.column_stack([ap[idx] for ap in tracker.area])
            a_c = np.column_stack([ap[idx] for ap in area_c])
            w = 2.0 * np.column_stack([si[idx] for si in s1]) - (L + 1)[:, None] * disp

            # two-route check: centered-minus-raw area vs the weighted-sum form
            corr_probe = np.empty((idx.size, P))
            for p, (i, j) in enumerate(pairs):
                corr_probe[:, p] = 0.5 * (w[:, i] * v_probe[j] - w[:, j] * v_probe[i])
            scale = np.maximum(1.0, np.maximum(np.abs(a_u).max(axis=1), np.abs(a_c).max(axis=1)))
            err = np.abs((a_c - a_u) - corr_probe).max(axis=1) / scale
            if (err > ROUTE_CHECK_RTOL).any():
                bad = int(idx[np.argmax(err)])
                raise AssertionError(
                    f"area drift-correction routes disagree on stream {stream_ids[bad]}: "
                    f"relative error {err.max():.3e}")
            np.maximum.at(max_route_err, idx, err)

            if bound_k > 0 and (np.abs(a_u).max(axis=1) > bound_k * L.astype(np.float64) ** 2).any():
                raise AssertionError("excursion area exceeded the d R^2 L^2 bound")

            pos = write_pos[idx]
            flat_L[pos] = L
            flat_disp[pos] = disp
            flat_area[pos] = a_u
            flat_w[pos] = w
            write_pos[idx] += 1

            tracker.reset_columns(idx)
            for ap in area_c:
                ap[idx] = 0.0
            for si in s1:
                si[idx] = 0.0
            length[idx] = 0
            count[idx] += 1
            active = count < quotas

    columns = []
    for s, stream in enumerate(stream_ids):
        lo, hi = offsets[s], offsets[s + 1]
        columns.append(HarvestColumn(
            stream=int(stream),
            length=flat_L[lo:hi],
            displacement=flat_disp[lo:hi],
            area=flat_area[lo:hi],
            corr_weight=flat_w[lo:hi],
            max_route_err=float(max_route_err[s]),
        ))
    return columns


def sample_terminal_ensemble(model: PeriodicGraphModel, start_cell: int, n_steps: int,
                             n_realizations: int, seed: int, base_stream: int = 0):
    """Terminal displacement and signed area of many independent trajectories.

    Returns (positions, areas): (R, d) displacements from the start point and
    (R, P) upper-triangle signed areas after n_steps.  Realizations are keyed
    by shard, so a run can be split across workers along shard boundaries
    without changing any number.
    """
    R = n_realizations
    kernel = StepKernel(model, R)
    tracker = AreaTracker(model.dim_E, R)
    uniforms = ShardUniforms(seed, R, base_stream, _ensemble_block(R))
    cells = np.full(R, start_cell, dtype=np.int64)
    for _ in range(n_steps):
        u = uniforms.next_row()
        kernel.advance(u, cells)
        tracker.update(kernel.dx)
    return tracker.positions(), tracker.areas()
