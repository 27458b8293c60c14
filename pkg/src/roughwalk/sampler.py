"""Trajectory simulation and pseudo-excursion decomposition.

Lattice coordinates are kept in exact integer arithmetic throughout; paths are
embedded into real vectors only when handed to the rough-path algebra.  Each
step is drawn by inverse CDF over the source cell's transition list, in the
order the transitions appear in the model, from a counter-based stream keyed
by (seed, trajectory id).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import rng
from .algebra import discrete_area
from .graph import GraphPoint, PeriodicGraphModel, require_valid


@dataclass(frozen=True)
class CellTables:
    """Per-cell transition lookup tables in model order."""

    cumprob: list[np.ndarray]        # cumulative probabilities per cell
    delta: list[np.ndarray]          # (k, r) lattice displacements per cell
    to_cell: list[np.ndarray]        # (k,) target cells
    increment: list[np.ndarray]      # (k, d) embedded displacements

    @classmethod
    def build(cls, model: PeriodicGraphModel) -> "CellTables":
        cumprob, delta, to_cell, increment = [], [], [], []
        for c in range(model.n_cells):
            ts = model.transitions_from(c)
            cumprob.append(np.cumsum([t.prob for t in ts]))
            delta.append(np.array([t.delta_lattice for t in ts], dtype=np.int64).reshape(len(ts), model.rank))
            to_cell.append(np.array([t.to_cell for t in ts], dtype=np.int64))
            increment.append(np.array([model.increment(t) for t in ts]))
        return cls(cumprob, delta, to_cell, increment)


@dataclass
class Trajectory:
    """A sampled path stored as integer lattice coordinates plus cell indices."""

    model: PeriodicGraphModel
    start: GraphPoint
    lattice: np.ndarray      # (n+1, r) int64
    cells: np.ndarray        # (n+1,) int64
    seed: int
    stream: int = 0

    def __len__(self) -> int:
        return self.cells.shape[0] - 1

    def point(self, n: int) -> GraphPoint:
        return GraphPoint(tuple(int(x) for x in self.lattice[n]), int(self.cells[n]))

    @cached_property
    def embedded(self) -> np.ndarray:
        """Real-vector positions, (n+1, d)."""
        basis = self.model.lattice_basis.astype(np.float64)
        return self.lattice.astype(np.float64) @ basis.T + self.model.cells[self.cells]


@dataclass
class Excursion:
    """One pseudo-excursion: the piece of path between consecutive returns of
    the cell index to its starting value, translated back by the lattice
    offset accumulated when it began.

    rel_path[0] is the embedded representative of the starting cell; for the
    incomplete tail of a finite trajectory `complete` is False and the path
    simply ends early.
    """

    index: int
    start_time: int
    length: int
    rel_path: np.ndarray          # (length+1, d)
    displacement: np.ndarray      # (d,)
    lattice_displacement: np.ndarray  # (r,) int64
    area: np.ndarray              # (d, d) antisymmetric
    complete: bool = True

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.rel_path, axis=0)


def sample_trajectory(model: PeriodicGraphModel, start: GraphPoint, n_steps: int,
                      seed: int, stream: int = 0) -> Trajectory:
    """Simulate n_steps transitions from `start`.

    Bit-reproducible for fixed (model, start, n_steps, seed, stream); one
    uniform variate is consumed per step.
    """
    require_valid(model)
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    tables = CellTables.build(model)
    r = model.rank
    lattice = np.empty((n_steps + 1, r), dtype=np.int64)
    cells = np.empty(n_steps + 1, dtype=np.int64)
    lattice[0] = start.lattice
    cells[0] = start.cell

    uniforms = rng.UniformBlocks(seed, stream, rng.TRAJECTORY)
    lam = list(start.lattice)
    cell = start.cell
    for n in range(1, n_steps + 1):
        u = uniforms.next()
        cum = tables.cumprob[cell]
        k = int(np.searchsorted(cum, u, side="right"))
        if k >= cum.size:  # guard against u landing on the final cumsum boundary
            k = cum.size - 1
        dl = tables.delta[cell][k]
        for i in range(r):
            lam[i] += int(dl[i])
        cell = int(tables.to_cell[cell][k])
        lattice[n] = lam
        cells[n] = cell
    return Trajectory(model=model, start=start, lattice=lattice, cells=cells, seed=seed, stream=stream)


def _excursion_from_slice(model, lattice, cells, lo, hi, index, complete) -> Excursion:
    """Build the excursion covering steps lo..hi (inclusive endpoints)."""
    base = lattice[lo]
    rel_lattice = lattice[lo:hi + 1] - base
    rel_path = rel_lattice.astype(np.float64) @ model.lattice_basis.T.astype(np.float64) \
        + model.cells[cells[lo:hi + 1]]
    return Excursion(
        index=index,
        start_time=int(lo),
        length=int(hi - lo),
        rel_path=rel_path,
        displacement=rel_path[-1] - rel_path[0],
        lattice_displacement=(lattice[hi] - base).astype(np.int64),
        area=discrete_area(rel_path),
        complete=complete,
    )


def decompose_excursions(traj: Trajectory):
    """Split a trajectory at the return times of its cell index.

    Returns (stopping_times, excursions, tail): stopping_times[0] = 0 and each
    later entry is the next time the cell index revisits its starting value;
    `excursions` holds the complete pieces; `tail` is the incomplete remainder
    (possibly of length zero) and is never fed to estimators.
    """
    cells = traj.cells
    returns = np.flatnonzero(cells[1:] == cells[0]) + 1
    stopping_times = np.concatenate(([0], returns)).astype(np.int64)
    excursions = []
    for k in range(len(stopping_times) - 1):
        lo, hi = stopping_times[k], stopping_times[k + 1]
        excursions.append(_excursion_from_slice(traj.model, traj.lattice, cells, lo, hi, k, True))
    last = stopping_times[-1]
    tail = _excursion_from_slice(traj.model, traj.lattice, cells, last, len(traj), len(excursions), False)
    return stopping_times, excursions, tail


def excursion_stream(model: PeriodicGraphModel, start: GraphPoint, seed: int, stream: int = 0):
    """Yield the successive complete excursions of one unbounded trajectory.

    Memory stays bounded by the current excursion length.  The k-th yielded
    excursion equals the k-th excursion of any sufficiently long trajectory
    sampled with the same (seed, stream).
    """
    require_valid(model)
    tables = CellTables.build(model)
    r = model.rank
    uniforms = rng.UniformBlocks(seed, stream, rng.TRAJECTORY)

    start_cell = start.cell
    t0 = 0
    index = 0
    lam = [0] * r            # lattice offset relative to the excursion start
    cell = start_cell
    lattice_buf = [tuple(lam)]
    cell_buf = [cell]
    step = 0
    while True:
        u = uniforms.next()
        cum = tables.cumprob[cell]
        k = int(np.searchsorted(cum, u, side="right"))
        if k >= cum.size:
            k = cum.size - 1
        dl = tables.delta[cell][k]
        for i in range(r):
            lam[i] += int(dl[i])
        cell = int(tables.to_cell[cell][k])
        lattice_buf.append(tuple(lam))
        cell_buf.append(cell)
        step += 1
        if cell == start_cell:
            lattice = np.array(lattice_buf, dtype=np.int64)
            cells = np.array(cell_buf, dtype=np.int64)
            yield _excursion_from_slice(model, lattice, cells, 0, len(cells) - 1, index, True)
            index += 1
            t0 += step
            step = 0
            lam = [0] * r
            lattice_buf = [tuple(lam)]
            cell_buf = [cell]


def reconstruct_embedded(traj: Trajectory, stopping_times, excursions, tail, n: int) -> np.ndarray:
    """Embedded position at time n rebuilt from the decomposition:
    basis @ lattice(T_k) + rel_path[n - T_k] for the piece covering n."""
    k = int(np.searchsorted(stopping_times, n, side="right")) - 1
    exc = excursions[k] if k < len(excursions) else tail
    t_k = int(stopping_times[k])
    base = traj.model.lattice_basis.astype(np.float64) @ traj.lattice[t_k].astype(np.float64)
    return base + exc.rel_path[n - t_k]


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Dump as rows: step, lattice coordinates, cell, embedded coordinates."""
    r = traj.model.rank
    d = traj.model.dim_E
    emb = traj.embedded
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + [f"lattice_{i}" for i in range(r)] + ["cell"]
                        + [f"x_{i}" for i in range(d)])
        for n in range(len(traj) + 1):
            writer.writerow([n] + [int(x) for x in traj.lattice[n]] + [int(traj.cells[n])]
                            + [repr(float(x)) for x in emb[n]])


def write_excursions_csv(excursions, path, dim: int) -> None:
    """Dump rows: k, T_k, L_k, displacement components, area components."""
    pairs = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "T_k", "L_k"] + [f"disp_{i}" for i in range(dim)]
                        + [f"area_{i}_{j}" for i, j in pairs])
        for exc in excursions:
            writer.writerow([exc.index, exc.start_time, exc.length]
                            + [repr(float(x)) for x in exc.displacement]
                            + [repr(float(exc.area[i, j])) for i, j in pairs])
