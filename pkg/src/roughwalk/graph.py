"""Periodic graphs and lattice-invariant transition laws.

A periodic graph is a discrete subset of R^d invariant under translation by a
lattice.  Points are parametrized as (lattice coordinate, cell index) where the
cell index picks one representative of the finite fundamental cell.  A
transition law is lattice-invariant when the jump probabilities depend only on
the cell of the source point and the relative position of the target, so the
whole law is a finite list of (from_cell, delta_lattice, to_cell, prob)
records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateCovariance, NotIrreducible, NotStochastic

PROB_TOL = 1e-12  # absolute tolerance on row sums; inputs are never renormalized


@dataclass(frozen=True)
class Transition:
    from_cell: int
    delta_lattice: tuple[int, ...]
    to_cell: int
    prob: float


@dataclass(frozen=True)
class GraphPoint:
    """A graph point as (lattice coordinate, cell index)."""

    lattice: tuple[int, ...]
    cell: int


@dataclass(frozen=True)
class ValidationReport:
    is_stochastic: bool
    is_irreducible: bool
    has_central_symmetry: bool | None
    increment_bound_R: float
    messages: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.is_stochastic and self.is_irreducible


@dataclass(frozen=True)
class PeriodicGraphModel:
    """Finite description of a lattice-invariant Markov chain on a periodic graph.

    dim_E        -- dimension d of the ambient space
    lattice_basis -- d x r integer matrix whose columns generate the lattice
    cells        -- one representative vector per fundamental-cell point
    transitions  -- finite jump list; probabilities from each cell must sum to 1
    """

    dim_E: int
    lattice_basis: np.ndarray
    cells: np.ndarray
    transitions: tuple[Transition, ...]
    name: str = "custom"

    def __post_init__(self):
        basis = np.asarray(self.lattice_basis)
        if basis.ndim != 2 or basis.shape[0] != self.dim_E:
            raise ValueError(f"lattice_basis must be {self.dim_E} x r, got shape {basis.shape}")
        if not np.array_equal(basis, basis.astype(np.int64)):
            raise ValueError("lattice_basis must be integer-valued")
        object.__setattr__(self, "lattice_basis", basis.astype(np.int64))
        cells = np.asarray(self.cells, dtype=np.float64)
        if cells.ndim != 2 or cells.shape[1] != self.dim_E:
            raise ValueError(f"cells must be n x {self.dim_E}, got shape {cells.shape}")
        object.__setattr__(self, "cells", cells)
        for t in self.transitions:
            if not (0 <= t.from_cell < self.n_cells and 0 <= t.to_cell < self.n_cells):
                raise ValueError(f"transition cell index out of range: {t}")
            if len(t.delta_lattice) != self.rank:
                raise ValueError(f"delta_lattice must have length {self.rank}: {t}")
            if t.prob < 0:
                raise ValueError(f"negative probability: {t}")
        object.__setattr__(self, "transitions", tuple(self.transitions))

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def rank(self) -> int:
        return self.lattice_basis.shape[1]

    def transitions_from(self, cell: int) -> list[Transition]:
        return [t for t in self.transitions if t.from_cell == cell]

    def increment(self, t: Transition) -> np.ndarray:
        """Embedded displacement of one jump."""
        delta = np.asarray(t.delta_lattice, dtype=np.int64)
        return self.cells[t.to_cell] + self.lattice_basis @ delta - self.cells[t.from_cell]

    def to_dict(self) -> dict:
        return {
            "dim_E": self.dim_E,
            "lattice_basis": self.lattice_basis.tolist(),
            "cells": self.cells.tolist(),
            "transitions": [
                {
                    "from_cell": t.from_cell,
                    "delta_lattice": list(t.delta_lattice),
                    "to_cell": t.to_cell,
                    "prob": t.prob,
                }
                for t in self.transitions
            ],
        }


def embed(model: PeriodicGraphModel, point: GraphPoint) -> np.ndarray:
    """Embedded position: lattice_basis @ lattice + cell representative.

    Additive in the lattice coordinate, exactly, for integer inputs.
    """
    lam = np.asarray(point.lattice, dtype=np.int64)
    return model.lattice_basis @ lam + model.cells[point.cell]


def project_transition_law(model: PeriodicGraphModel) -> np.ndarray:
    """Transition matrix of the projected chain on the fundamental cell.

    Entry (x0, y0) sums the probabilities of all jumps from x0 to y0,
    whatever the lattice displacement.
    """
    q0 = np.zeros((model.n_cells, model.n_cells))
    for t in model.transitions:
        q0[t.from_cell, t.to_cell] += t.prob
    return q0


def check_irreducible(q0: np.ndarray) -> tuple[bool, list[list[int]]]:
    """Strong connectivity of the directed graph of nonzero entries.

    Returns (flag, communicating classes); classes are singletons-or-larger
    lists of cell indices, in component order.
    """
    n = q0.shape[0]
    adj = csr_matrix((q0 > 0).astype(np.int8))
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    classes = [[] for _ in range(n_comp)]
    for node in range(n):
        classes[labels[node]].append(node)
    return n_comp == 1, classes


def _row_sums(model: PeriodicGraphModel) -> np.ndarray:
    sums = np.zeros(model.n_cells)
    for t in model.transitions:
        sums[t.from_cell] += t.prob
    return sums


def _distinct_mod_lattice(model: PeriodicGraphModel) -> list[str]:
    """Diagnostics for cell representatives that coincide modulo the lattice."""
    msgs = []
    basis = model.lattice_basis.astype(np.float64)
    pinv = np.linalg.pinv(basis)
    for i in range(model.n_cells):
        for j in range(i + 1, model.n_cells):
            diff = model.cells[j] - model.cells[i]
            coeff = pinv @ diff
            rounded = np.round(coeff)
            if np.allclose(basis @ rounded, diff, atol=1e-9) and np.allclose(coeff, rounded, atol=1e-9):
                msgs.append(f"cells {i} and {j} coincide modulo the lattice")
    return msgs


def check_central_symmetry(model: PeriodicGraphModel, cell_involution) -> bool:
    """Check Q(x, x+delta) == Q(i(x), i(x)-delta) for an involution i of the cells.

    The involution is supplied as a mapping cell index -> cell index; the
    embedded increment of the mirrored jump must be the negated increment.
    """
    index = {}
    for t in model.transitions:
        key = (t.from_cell, tuple(np.round(model.increment(t), 12)))
        index[key] = index.get(key, 0.0) + t.prob
    for (c, inc), prob in index.items():
        mirrored = (cell_involution(c), tuple(-x for x in inc))
        if abs(index.get(mirrored, 0.0) - prob) > PROB_TOL:
            return False
    return True


def validate(model: PeriodicGraphModel, cell_involution=None) -> ValidationReport:
    """Validate a model: row sums, irreducibility of the projected chain,
    increment bound, and (optionally) central symmetry.

    Never raises for stochasticity/irreducibility failures; those are reported
    through the flags and messages.  Use `require_valid` to enforce them.
    """
    messages: list[str] = []

    sums = _row_sums(model)
    bad = np.nonzero(np.abs(sums - 1.0) > PROB_TOL)[0]
    is_stochastic = bad.size == 0
    for cell in bad:
        messages.append(f"row sum for cell {cell} is {sums[cell]:.15g}")

    messages.extend(_distinct_mod_lattice(model))

    increments = [model.increment(t) for t in model.transitions]
    bound = float(max((np.linalg.norm(inc) for inc in increments), default=0.0))

    q0 = project_transition_law(model)
    is_irreducible, classes = check_irreducible(q0)
    if not is_irreducible:
        messages.append(f"projected chain has communicating classes {classes}")

    has_sym = None
    if cell_involution is not None:
        has_sym = check_central_symmetry(model, cell_involution)
        if not has_sym:
            messages.append("central symmetry check failed")

    return ValidationReport(
        is_stochastic=is_stochastic,
        is_irreducible=is_irreducible,
        has_central_symmetry=has_sym,
        increment_bound_R=bound,
        messages=tuple(messages),
    )


def require_valid(model: PeriodicGraphModel) -> ValidationReport:
    """Validate and raise NotStochastic / NotIrreducible on failure."""
    sums = _row_sums(model)
    bad = np.nonzero(np.abs(sums - 1.0) > PROB_TOL)[0]
    if bad.size:
        cell = int(bad[0])
        raise NotStochastic(cell, float(sums[cell]))
    report = validate(model)
    if not report.is_irreducible:
        _, classes = check_irreducible(project_transition_law(model))
        raise NotIrreducible(classes)
    return report


def whitening_transform(C: np.ndarray) -> np.ndarray:
    """Matrix M with M @ C @ M.T = I, for symmetric positive-definite C.

    M is the inverse of the lower-triangular Cholesky factor, which fixes the
    choice among all valid whiteners.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("C must be square")
    if not np.allclose(C, C.T, atol=1e-10 * max(1.0, float(np.abs(C).max()))):
        raise ValueError("C must be symmetric")
    eigvals = np.linalg.eigvalsh(C)
    if eigvals.min() <= 1e-12:
        rank = int(np.sum(eigvals > 1e-12))
        raise DegenerateCovariance(rank, dim=C.shape[0])
    L = np.linalg.cholesky(C)
    return np.linalg.inv(L)


def stationary_distribution(q0: np.ndarray) -> np.ndarray:
    """Stationary law of an irreducible stochastic matrix."""
    n = q0.shape[0]
    # solve pi (Q0 - I) = 0 with the normalization sum(pi) = 1
    a = np.vstack([(q0.T - np.eye(n)), np.ones(n)])
    b = np.concatenate([np.zeros(n), [1.0]])
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def step_second_moment(model: PeriodicGraphModel) -> np.ndarray:
    """E[dX dX^T] of one step under the stationary law of the projected chain."""
    pi = stationary_distribution(project_transition_law(model))
    m2 = np.zeros((model.dim_E, model.dim_E))
    for t in model.transitions:
        inc = model.increment(t)
        m2 += pi[t.from_cell] * t.prob * np.outer(inc, inc)
    return m2


# ---------------------------------------------------------------------------
# Built-in models


def rotating_model(p: float) -> PeriodicGraphModel:
    """Planar walk whose step direction cycles east/north/west/south.

    The k-th step moves by +1 or -1 along the cycling axis with probabilities
    p and 1-p.  The projection onto the four-point fundamental cell is the
    deterministic cyclic shift.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    q = 1.0 - p
    # cell representatives visited in order from the origin
    cells = [(0, 0), (1, 0), (1, 1), (0, 1)]
    # (from_cell, step on +axis) and the lattice offsets bringing the target
    # back to its representative; basis is 2*I
    transitions = [
        Transition(0, (0, 0), 1, p), Transition(0, (-1, 0), 1, q),
        Transition(1, (0, 0), 2, p), Transition(1, (0, -1), 2, q),
        Transition(2, (0, 0), 3, p), Transition(2, (1, 0), 3, q),
        Transition(3, (0, 0), 0, p), Transition(3, (0, 1), 0, q),
    ]
    return PeriodicGraphModel(
        dim_E=2,
        lattice_basis=2 * np.eye(2, dtype=np.int64),
        cells=np.array(cells, dtype=np.float64),
        transitions=tuple(transitions),
        name=f"rotating(p={p})",
    )


# Jump table of the three-dimensional cubic model, one row per cell of the
# 2x2x2 fundamental domain, entries for (+e1, -e1, +e2, -e2, +e3, -e3) as
# (symbol, denominator) pairs over u and v = 1-u.
_CUBIC_ROWS = {
    (0, 0, 0): [("u", 2), ("v", 2), ("u", 2), ("v", 2), None, None],
    (1, 0, 0): [None, None, ("u", 2), ("v", 2), ("u", 2), ("v", 2)],
    (0, 1, 0): [("u", 3), ("v", 3), ("v", 3), ("u", 3), ("u", 3), ("v", 3)],
    (1, 1, 0): [("v", 2), ("u", 2), None, None, ("u", 2), ("v", 2)],
    (0, 0, 1): [("u", 2), ("v", 2), None, None, ("v", 2), ("u", 2)],
    # The historical form of this row has v/3 at -e1, which breaks both the
    # row sum and the central symmetry; u/3 is the unique single-entry repair
    # consistent with the symmetry.
    (1, 0, 1): [("v", 3), ("u", 3), ("u", 3), ("v", 3), ("v", 3), ("u", 3)],
    (0, 1, 1): [None, None, ("v", 2), ("u", 2), ("v", 2), ("u", 2)],
    (1, 1, 1): [("v", 2), ("u", 2), ("v", 2), ("u", 2), None, None],
}

_CUBIC_RAW_OVERRIDE = {((1, 0, 1), 1): ("v", 3)}  # direction index 1 is -e1


def cubic_model(u: float, correct_typo: bool = True) -> PeriodicGraphModel:
    """Three-dimensional nearest-neighbour model on the 2x2x2 periodic cube.

    Jump rates depend only on coordinate parities; the central symmetry
    cell -> cell + (1,1,1) with reversed jumps kills the asymptotic drift.
    With correct_typo=False the historical defective row is kept, leaving it
    to sum to (2u+4v)/3 instead of 1; validation rejects that variant.
    """
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1)")
    values = {"u": u, "v": 1.0 - u}
    cell_list = [(a, b, c) for c in (0, 1) for b in (0, 1) for a in (0, 1)]
    cell_index = {cell: i for i, cell in enumerate(cell_list)}
    directions = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]

    transitions = []
    for cell, row in _CUBIC_ROWS.items():
        for k, entry in enumerate(row):
            if not correct_typo and (cell, k) in _CUBIC_RAW_OVERRIDE:
                entry = _CUBIC_RAW_OVERRIDE[(cell, k)]
            if entry is None:
                continue
            sym, denom = entry
            prob = values[sym] / denom
            step = directions[k]
            target = tuple(cell[i] + step[i] for i in range(3))
            to_cell = tuple(t % 2 for t in target)
            delta = tuple((target[i] - to_cell[i]) // 2 for i in range(3))
            transitions.append(Transition(cell_index[cell], delta, cell_index[to_cell], prob))

    return PeriodicGraphModel(
        dim_E=3,
        lattice_basis=2 * np.eye(3, dtype=np.int64),
        cells=np.array(cell_list, dtype=np.float64),
        transitions=tuple(transitions),
        name=f"cubic(u={u})" if correct_typo else f"cubic-raw(u={u})",
    )


def cubic_cell_involution(model: PeriodicGraphModel):
    """The point reflection cell -> cell + (1,1,1) mod 2, as an index map."""
    lookup = {tuple(int(x) for x in c): i for i, c in enumerate(model.cells)}

    def involution(cell: int) -> int:
        c = tuple(int(x) for x in model.cells[cell])
        return lookup[tuple((x + 1) % 2 for x in c)]

    return involution


def builtin_model(name: str, p: float | None = None, u: float | None = None) -> PeriodicGraphModel:
    if name == "rotating":
        return rotating_model(0.9 if p is None else p)
    if name == "cubic":
        return cubic_model(0.9 if u is None else u)
    raise ValueError(f"unknown built-in model {name!r}; available: rotating, cubic")


def model_from_dict(data: dict) -> PeriodicGraphModel:
    transitions = tuple(
        Transition(
            from_cell=int(t["from_cell"]),
            delta_lattice=tuple(int(x) for x in t["delta_lattice"]),
            to_cell=int(t["to_cell"]),
            prob=float(t["prob"]),
        )
        for t in data["transitions"]
    )
    return PeriodicGraphModel(
        dim_E=int(data["dim_E"]),
        lattice_basis=np.asarray(data["lattice_basis"], dtype=np.int64),
        cells=np.asarray(data["cells"], dtype=np.float64),
        transitions=transitions,
        name=data.get("name", "file"),
    )


def load_model_file(path) -> PeriodicGraphModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def save_model_file(model: PeriodicGraphModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2)
