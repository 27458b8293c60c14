"""Independent test oracles (deliberately quadratic / literal) and path generators."""

import numpy as np

from roughwalk.graph import PeriodicGraphModel, Transition


def area_double_sum(points):
    """O(n^2) signed area straight from the definition, as a d x d matrix."""
    pts = np.asarray(points, dtype=np.float64)
    deltas = np.diff(pts, axis=0)
    n, d = deltas.shape
    a = np.zeros((d, d))
    for k in range(n):
        for l in range(k + 1, n):
            a += 0.5 * (np.outer(deltas[k], deltas[l]) - np.outer(deltas[l], deltas[k]))
    return a


def corr_double_sum(increments, v):
    """Literal double sum over pairs for the drift-correction term."""
    deltas = np.asarray(increments, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    L, d = deltas.shape
    w = np.zeros(d)
    for k in range(L):
        for l in range(k + 1, L):
            w += deltas[l] - deltas[k]
    return 0.5 * (np.outer(w, v) - np.outer(v, w))


def random_integer_path(rng, n_steps, d, lo=-2, hi=3):
    steps = rng.integers(lo, hi, size=(n_steps, d))
    return np.vstack([np.zeros((1, d), dtype=np.int64), np.cumsum(steps, axis=0)])


def single_cell_model():
    """One point, one self-loop of probability 1."""
    return PeriodicGraphModel(
        dim_E=1,
        lattice_basis=np.eye(1, dtype=np.int64),
        cells=np.zeros((1, 1)),
        transitions=(Transition(0, (0,), 0, 1.0),),
        name="loop",
    )


def uniform_walk_2d():
    """Simple walk with increments uniform on the four unit directions."""
    ts = tuple(Transition(0, d, 0, 0.25) for d in ((1, 0), (-1, 0), (0, 1), (0, -1)))
    return PeriodicGraphModel(
        dim_E=2,
        lattice_basis=np.eye(2, dtype=np.int64),
        cells=np.zeros((1, 2)),
        transitions=ts,
        name="uniform2d",
    )
