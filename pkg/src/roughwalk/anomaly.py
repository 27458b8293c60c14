"""Estimation and exact computation of the walk's limit constants.

For a validated model the quantities of interest are the per-step drift v,
the mean return time beta of the projected chain, the covariance C of the
centered excursion displacement, and the area anomaly

    Gamma = C^{-1} (E[area of an excursion] + E[drift correction]),

an antisymmetric matrix.  The drift correction compensates the re-centering
of excursions: for an excursion with increments dx_1..dx_L and drift v,

    Corr[i][j] = 1/2 * (W_i v_j - W_j v_i),   W = sum_m (2m - 1 - L) dx_m,

which equals the signed area of the centered increments minus the signed area
of the raw ones; both routes are computed and compared on every excursion
processed.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .algebra import pair_indices, upper_to_matrix
from .engine import HarvestColumn, harvest_excursions
from .errors import DegenerateCovariance, InsufficientData
from .graph import GraphPoint, PeriodicGraphModel, require_valid, whitening_transform
from .sampler import Excursion

N_BATCHES = 32
SUBSTREAMS_PER_BATCH = 32
SCALAR_C_RTOL = 0.05


def gamma_closed_form_rotating(p: float) -> float:
    """Area anomaly of the rotating-step model: (2p-1)^2 / (8p(1-p))."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    return (2.0 * p - 1.0) ** 2 / (8.0 * p * (1.0 - p))


def corr_term(excursion: Excursion, v) -> np.ndarray:
    """Area drift correction of one excursion for drift v.

    Evaluates the double sum over increment pairs in its factored form
    W = sum_m (2m - 1 - L) dx_m, Corr = 1/2 (W v^T - v W^T); satisfies
    |Corr[i][j]| <= 2 |v| R L^2 for increments bounded by R.
    """
    v = np.asarray(v, dtype=np.float64)
    deltas = excursion.increments
    L = deltas.shape[0]
    weights = 2.0 * np.arange(1, L + 1) - 1.0 - L
    w = weights @ deltas
    return 0.5 * (np.outer(w, v) - np.outer(v, w))


# ---------------------------------------------------------------------------
# Monte Carlo estimation


@dataclass
class _Sums:
    """Mergeable excursion accumulator."""

    n: int
    sum_L: float
    sum_L2: float
    sum_disp: np.ndarray       # (d,)
    sum_Ldisp: np.ndarray      # (d,)
    sum_disp2: np.ndarray      # (d, d)
    sum_area: np.ndarray       # (P,)
    sum_w: np.ndarray          # (d,)

    @classmethod
    def zero(cls, d: int, n_pairs: int) -> "_Sums":
        return cls(0, 0.0, 0.0, np.zeros(d), np.zeros(d), np.zeros((d, d)),
                   np.zeros(n_pairs), np.zeros(d))

    @classmethod
    def from_column(cls, col: HarvestColumn) -> "_Sums":
        L = col.length.astype(np.float64)
        return cls(
            n=int(col.length.size),
            sum_L=float(L.sum()),
            sum_L2=float((L * L).sum()),
            sum_disp=col.displacement.sum(axis=0),
            sum_Ldisp=(L[:, None] * col.displacement).sum(axis=0),
            sum_disp2=col.displacement.T @ col.displacement,
            sum_area=col.area.sum(axis=0),
            sum_w=col.corr_weight.sum(axis=0),
        )

    def merge(self, other: "_Sums") -> "_Sums":
        return _Sums(
            self.n + other.n,
            self.sum_L + other.sum_L,
            self.sum_L2 + other.sum_L2,
            self.sum_disp + other.sum_disp,
            self.sum_Ldisp + other.sum_Ldisp,
            self.sum_disp2 + other.sum_disp2,
            self.sum_area + other.sum_area,
            self.sum_w + other.sum_w,
        )


@dataclass
class AnomalyReport:
    """Estimated constants with batch-means standard errors.

    `gamma` is reported in whitened coordinates when the displacement
    covariance is not a multiple of the identity; `whitening` then holds the
    matrix used, otherwise None and `scalar_c` is the common variance.
    """

    v: np.ndarray
    beta: float
    C: np.ndarray
    mean_exc_area: np.ndarray
    mean_corr: np.ndarray
    gamma: np.ndarray
    n_excursions: int
    std_errors: dict
    scalar_c: float | None
    whitening: np.ndarray | None
    n_batches: int
    seed: int
    model_name: str = ""
    max_route_err: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "model": self.model_name,
            "n_excursions": self.n_excursions,
            "seed": self.seed,
            "v": self.v.tolist(),
            "beta": self.beta,
            "C": self.C.tolist(),
            "mean_exc_area": self.mean_exc_area.tolist(),
            "mean_corr": self.mean_corr.tolist(),
            "gamma": self.gamma.tolist(),
            "scalar_c": self.scalar_c,
            "whitening": None if self.whitening is None else self.whitening.tolist(),
            "n_batches": self.n_batches,
            "std_errors": {k: (val.tolist() if isinstance(val, np.ndarray) else val)
                           for k, val in self.std_errors.items()},
            "max_route_err": self.max_route_err,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)

    def csv_row_header(self) -> list[str]:
        d = self.v.shape[0]
        pairs = pair_indices(d)
        return (["model", "n_excursions", "seed", "beta", "beta_se"]
                + [f"v_{i}" for i in range(d)]
                + [f"gamma_{i}{j}" for i, j in pairs]
                + [f"gamma_se_{i}{j}" for i, j in pairs])

    def csv_row(self) -> list:
        d = self.v.shape[0]
        pairs = pair_indices(d)
        gse = self.std_errors["gamma"]
        return ([self.model_name, self.n_excursions, self.seed, self.beta,
                 self.std_errors["beta"]]
                + [float(x) for x in self.v]
                + [float(self.gamma[i, j]) for i, j in pairs]
                + [float(gse[i, j]) for i, j in pairs])


def _substream_quotas(n_excursions: int, n_batches: int) -> np.ndarray:
    """Fixed excursion quota per trajectory stream.

    Excursions are spread over batches first and then over each batch's
    substreams, so every batch holds at least one excursion whenever
    n_excursions >= n_batches.
    """
    quotas = np.zeros(n_batches * SUBSTREAMS_PER_BATCH, dtype=np.int64)
    per_batch = np.full(n_batches, n_excursions // n_batches, dtype=np.int64)
    per_batch[: n_excursions % n_batches] += 1
    for b, n_b in enumerate(per_batch):
        lo = b * SUBSTREAMS_PER_BATCH
        quotas[lo:lo + SUBSTREAMS_PER_BATCH] = n_b // SUBSTREAMS_PER_BATCH
        quotas[lo:lo + n_b % SUBSTREAMS_PER_BATCH] += 1
    return quotas


def _harvest_task(args):
    model, start_cell, quotas, seed, stream_ids, bound = args
    return harvest_excursions(model, start_cell, quotas, seed, stream_ids, bound)


def _combine(sums: _Sums, scalar_c, whitening, v):
    """Anomaly matrix from merged sums, in the chosen normalization."""
    mean_area = sums.sum_area / sums.n
    mean_w = sums.sum_w / sums.n
    d = v.shape[0]
    corr = 0.5 * (np.outer(mean_w, v) - np.outer(v, mean_w))
    total = upper_to_matrix(mean_area, d) + corr
    if whitening is None:
        return total / scalar_c
    return whitening @ total @ whitening.T


def _covariance(sums: _Sums, v: np.ndarray) -> np.ndarray:
    """Sample covariance of (disp - L v); the mean of that vector vanishes
    exactly when v = sum(disp)/sum(L) of the same sums."""
    return (sums.sum_disp2 - np.outer(v, sums.sum_Ldisp) - np.outer(sums.sum_Ldisp, v)
            + sums.sum_L2 * np.outer(v, v)) / (sums.n - 1)


def _batch_gamma(sums: _Sums, scalar_branch: bool, fallback_c, fallback_M):
    """The full estimator applied to one batch, for batch-means errors.

    The scalar-vs-whitened branch is decided globally; within the branch each
    batch renormalizes with its own covariance so that the spread of the
    batch values reflects the denominator noise of the ratio as well.  Batches
    too small (or too degenerate) to renormalize fall back to the global
    normalization.
    """
    v_b = sums.sum_disp / sums.sum_L
    if sums.n < 8:
        return _combine(sums, fallback_c, fallback_M, v_b)
    cov_b = _covariance(sums, v_b)
    if scalar_branch:
        c_b = float(np.trace(cov_b)) / cov_b.shape[0]
        if c_b <= 1e-12:
            return _combine(sums, fallback_c, fallback_M, v_b)
        return _combine(sums, c_b, None, v_b)
    try:
        m_b = whitening_transform(cov_b)
    except DegenerateCovariance:
        return _combine(sums, fallback_c, fallback_M, v_b)
    return _combine(sums, None, m_b, v_b)


def estimate_constants(model: PeriodicGraphModel, start: GraphPoint, n_excursions: int,
                       seed: int, workers: int = 1, scalar_c_rtol: float = SCALAR_C_RTOL,
                       return_samples: bool = False):
    """Monte Carlo estimates of (v, beta, C, mean excursion area, mean drift
    correction, Gamma) over n_excursions complete excursions.

    Work is organized in 32 batches of 32 trajectory streams each; batches
    double as the groups for batch-means standard errors, and any number of
    workers reproduces the single-worker result because every stream id and
    quota is fixed up front.
    """
    report = require_valid(model)
    if n_excursions < 2:
        raise InsufficientData(f"need at least 2 excursions, requested {n_excursions}")
    d = model.dim_E
    pairs = pair_indices(d)
    n_batches = min(N_BATCHES, n_excursions)
    quotas = _substream_quotas(n_excursions, n_batches)
    total_streams = quotas.size
    stream_ids = np.arange(total_streams)

    if workers <= 1:
        columns = harvest_excursions(model, start.cell, quotas, seed, stream_ids,
                                     report.increment_bound_R)
    else:
        parts = np.array_split(stream_ids, min(workers, total_streams))
        tasks = [(model, start.cell, quotas[part], seed, part, report.increment_bound_R)
                 for part in parts if part.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_harvest_task, tasks))
        columns = [col for cols in results for col in cols]
        columns.sort(key=lambda c: c.stream)

    batch_sums = []
    for b in range(n_batches):
        acc = _Sums.zero(d, len(pairs))
        for col in columns[b * SUBSTREAMS_PER_BATCH:(b + 1) * SUBSTREAMS_PER_BATCH]:
            acc = acc.merge(_Sums.from_column(col))
        batch_sums.append(acc)
    total = batch_sums[0]
    for acc in batch_sums[1:]:
        total = total.merge(acc)
    assert total.n == n_excursions

    beta = total.sum_L / total.n
    v = total.sum_disp / total.sum_L
    cov = _covariance(total, v)

    scalar_c, whitening = _scalar_or_whiten(cov, scalar_c_rtol)
    gamma = _combine(total, scalar_c, whitening, v)
    mean_area = upper_to_matrix(total.sum_area / total.n, d)
    mean_w = total.sum_w / total.n
    mean_corr = 0.5 * (np.outer(mean_w, v) - np.outer(v, mean_w))

    # batch-means standard errors: the estimator is re-applied per batch
    B = len(batch_sums)
    beta_b = np.array([s.sum_L / s.n for s in batch_sums])
    v_b = np.array([s.sum_disp / s.sum_L for s in batch_sums])
    gamma_b = np.array([_batch_gamma(s, whitening is None, scalar_c, whitening)
                        for s in batch_sums])
    area_b = np.array([upper_to_matrix(s.sum_area / s.n, d) for s in batch_sums])
    sqrt_b = np.sqrt(B)
    std_errors = {
        "beta": float(beta_b.std(ddof=1) / sqrt_b) if B > 1 else float("nan"),
        "v": v_b.std(axis=0, ddof=1) / sqrt_b if B > 1 else np.full(d, np.nan),
        "gamma": gamma_b.std(axis=0, ddof=1) / sqrt_b if B > 1 else np.full((d, d), np.nan),
        "mean_exc_area": area_b.std(axis=0, ddof=1) / sqrt_b if B > 1 else np.full((d, d), np.nan),
    }

    out = AnomalyReport(
        v=v, beta=float(beta), C=cov, mean_exc_area=mean_area, mean_corr=mean_corr,
        gamma=gamma, n_excursions=int(total.n), std_errors=std_errors,
        scalar_c=scalar_c, whitening=whitening, n_batches=B, seed=seed,
        model_name=model.name,
        max_route_err=max(c.max_route_err for c in columns),
    )
    if return_samples:
        samples = {
            "length": np.concatenate([c.length for c in columns]),
            "displacement": np.vstack([c.displacement for c in columns]),
            "area": np.vstack([c.area for c in columns]),
            "corr_weight": np.vstack([c.corr_weight for c in columns]),
        }
        return out, samples
    return out


def _scalar_or_whiten(cov: np.ndarray, rtol: float):
    """Decide between the scalar normalization Gamma = S / c and the whitened
    one Gamma = M S M^T; returns (scalar_c, whitening) with exactly one set."""
    d = cov.shape[0]
    c = float(np.trace(cov)) / d
    if c <= 1e-12:
        raise DegenerateCovariance(0, dim=d)
    if np.abs(cov - c * np.eye(d)).max() <= rtol * c:
        return c, None
    return None, whitening_transform(cov)


# ---------------------------------------------------------------------------
# Exact enumeration


@dataclass
class EnumerationResult:
    """Excursion-law expectations restricted to the enumerated paths.

    covered_mass is the total probability of the paths enumerated; with mass 1
    the figures are exact up to floating point.
    """

    gamma: np.ndarray
    covered_mass: float
    v: np.ndarray
    beta: float
    covariance: np.ndarray
    mean_exc_area: np.ndarray
    mean_corr: np.ndarray
    n_paths: int
    max_len: int
    scalar_c: float | None
    whitening: np.ndarray | None


def exact_gamma_enumeration(model: PeriodicGraphModel, start: GraphPoint, max_len: int,
                            prob_floor: float = 0.0,
                            scalar_c_rtol: float = SCALAR_C_RTOL) -> EnumerationResult:
    """Depth-first enumeration of all excursion paths of length <= max_len and
    running probability > prob_floor; expectations are taken under the law of
    the excursion conditioned on the covered set."""
    require_valid(model)
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    d = model.dim_E
    pairs = pair_indices(d)
    P = len(pairs)
    from .sampler import CellTables

    tables = CellTables.build(model)
    start_cell = start.cell
    # per-cell transition lists as plain python values; the DFS below runs on
    # tuples to keep per-node cost small
    rng_d = range(d)
    transitions = []
    for c in range(model.n_cells):
        cum = np.concatenate(([0.0], tables.cumprob[c]))
        rows = []
        for t_idx in range(tables.to_cell[c].size):
            p_step = float(cum[t_idx + 1] - cum[t_idx])
            if p_step > 0.0:
                rows.append((p_step, tuple(float(v) for v in tables.increment[c][t_idx]),
                             int(tables.to_cell[c][t_idx])))
        transitions.append(rows)

    mass = 0.0
    n_paths = 0
    e_L = 0.0
    e_L2 = 0.0
    acc_disp = [0.0] * d
    acc_Ldisp = [0.0] * d
    acc_disp2 = [0.0] * (d * d)
    acc_area = [0.0] * P
    acc_w = [0.0] * d

    zero_d = (0.0,) * d
    # stack entries: (cell, prob, depth, position, area pairs, weighted sum s1)
    stack = [(start_cell, 1.0, 0, zero_d, (0.0,) * P, zero_d)]
    while stack:
        cell, prob, depth, x, area, s1 = stack.pop()
        new_depth = depth + 1
        for p_step, dx, new_cell in transitions[cell]:
            child_prob = prob * p_step
            if child_prob <= prob_floor:
                continue
            new_area = tuple(area[p] + 0.5 * (x[i] * dx[j] - x[j] * dx[i])
                             for p, (i, j) in enumerate(pairs))
            new_x = tuple(x[i] + dx[i] for i in rng_d)
            new_s1 = tuple(s1[i] + new_depth * dx[i] for i in rng_d)
            if new_cell == start_cell:
                mass += child_prob
                n_paths += 1
                e_L += child_prob * new_depth
                e_L2 += child_prob * new_depth * new_depth
                pl = child_prob * new_depth
                pw = new_depth + 1
                for i in rng_d:
                    xi = new_x[i]
                    acc_disp[i] += child_prob * xi
                    acc_Ldisp[i] += pl * xi
                    acc_w[i] += child_prob * (2.0 * new_s1[i] - pw * xi)
                    base = i * d
                    for j in rng_d:
                        acc_disp2[base + j] += child_prob * xi * new_x[j]
                for p in range(P):
                    acc_area[p] += child_prob * new_area[p]
            elif new_depth < max_len:
                stack.append((new_cell, child_prob, new_depth, new_x, new_area, new_s1))

    e_disp = np.array(acc_disp)
    e_Ldisp = np.array(acc_Ldisp)
    e_disp2 = np.array(acc_disp2).reshape(d, d)
    e_area = np.array(acc_area)
    e_w = np.array(acc_w)

    if mass <= 0.0 or n_paths == 0:
        nan = np.full((d, d), np.nan)
        return EnumerationResult(nan, 0.0, np.full(d, np.nan), float("nan"), nan,
                                 nan, nan, 0, max_len, None, None)

    e_L /= mass
    e_L2 /= mass
    e_disp /= mass
    e_Ldisp /= mass
    e_disp2 /= mass
    e_area /= mass
    e_w /= mass

    v = e_disp / e_L
    # conditional covariance of (disp - L v); its conditional mean is zero by
    # the choice of v
    cov = e_disp2 - np.outer(v, e_Ldisp) - np.outer(e_Ldisp, v) + e_L2 * np.outer(v, v)
    scalar_c, whitening = _scalar_or_whiten(cov, scalar_c_rtol)
    mean_corr = 0.5 * (np.outer(e_w, v) - np.outer(v, e_w))
    total = upper_to_matrix(e_area, d) + mean_corr
    gamma = total / scalar_c if whitening is None else whitening @ total @ whitening.T

    return EnumerationResult(
        gamma=gamma, covered_mass=float(mass), v=v, beta=float(e_L), covariance=cov,
        mean_exc_area=upper_to_matrix(e_area, d), mean_corr=mean_corr,
        n_paths=n_paths, max_len=max_len, scalar_c=scalar_c, whitening=whitening,
    )
