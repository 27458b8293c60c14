"""Difference equations driven by the chain and corrected Euler schemes.

The scalar difference equation

    U_{n+1} - U_n = eps * [f(U_n) (X_{n+1} - X_n) + g(U_n) (Y_{n+1} - Y_n)]

is iterated either along a supplied two-dimensional path or, vectorized, along
freshly sampled model trajectories.  Its large-N limit is matched by the Euler
scheme

    U_{t+dt} = U_t + f dB1 + g dB2 + 1/2 (f'f + g'g) K dt + 1/2 (f'g - f g') gamma dt

whose constants K and gamma are supplied by the caller; see
`left_point_euler_constants` for the wiring that reproduces the difference
scheme driven by the whitened chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .engine import ENSEMBLE_SHARD, ShardUniforms, StepKernel, _ensemble_block
from .errors import NonFinite, SingularStep
from .graph import PeriodicGraphModel

_DERIV_TEST_POINTS = np.array([-2.0, -1.1, -0.4, 0.3, 0.9, 1.7])
_DERIV_STEP = 1e-5
_DERIV_RTOL = 1e-6


@dataclass(frozen=True)
class VectorField1D:
    """Coefficients (f, g) of the scalar equation with analytic derivatives.

    All four callables must accept numpy arrays (scalar returns broadcast).
    Derivatives are checked against central finite differences of f and g at
    fixed test points when the object is built.
    """

    f: callable
    g: callable
    f_prime: callable
    g_prime: callable

    def __post_init__(self):
        for fn, deriv, name in ((self.f, self.f_prime, "f"), (self.g, self.g_prime, "g")):
            x = _DERIV_TEST_POINTS
            fd = (np.asarray(fn(x + _DERIV_STEP), dtype=float)
                  - np.asarray(fn(x - _DERIV_STEP), dtype=float)) / (2 * _DERIV_STEP)
            fd = np.broadcast_to(fd, x.shape)
            an = np.broadcast_to(np.asarray(deriv(x), dtype=float), x.shape)
            err = np.abs(fd - an) / np.maximum(1.0, np.abs(an))
            if err.max() > _DERIV_RTOL:
                raise ValueError(
                    f"derivative of {name} disagrees with finite differences "
                    f"(relative error {err.max():.2e})")


def drive_difference_eq(vf: VectorField1D, u0: float, traj_2d, eps: float | None = None) -> np.ndarray:
    """Iterate the difference equation along one embedded 2-d path.

    eps defaults to 1/sqrt(N) with N the number of steps in the path (the
    diffusive scaling).  Returns U_0..U_n; raises NonFinite with the step
    index if the state overflows.
    """
    path = np.asarray(traj_2d, dtype=np.float64)
    if path.ndim != 2 or path.shape[1] != 2:
        raise ValueError("trajectory must be a sequence of 2-vectors")
    n = path.shape[0] - 1
    if eps is None:
        eps = 1.0 / np.sqrt(max(n, 1))
    out = np.empty(n + 1)
    out[0] = u = float(u0)
    f, g = vf.f, vf.g
    for k in range(n):
        dx = path[k + 1, 0] - path[k, 0]
        dy = path[k + 1, 1] - path[k, 1]
        u = u + eps * (f(u) * dx + g(u) * dy)
        if not np.isfinite(u):
            raise NonFinite(k + 1, u)
        out[k + 1] = u
    return out


def drive_difference_eq_ensemble(vf: VectorField1D, u0: float, model: PeriodicGraphModel,
                                 start_cell: int, n_steps: int, n_paths: int, seed: int,
                                 eps: float | None = None, increment_scale: float = 1.0,
                                 base_stream: int = 0) -> np.ndarray:
    """Terminal values U_n of the difference equation along n_paths freshly
    sampled trajectories (dimension-2 models only).

    eps defaults to 1/sqrt(n_steps); increments are multiplied by
    increment_scale before driving (pass 1/sigma to drive with the whitened
    chain).  Streams are keyed per 256-path shard like the other ensembles.
    """
    if model.dim_E != 2:
        raise ValueError("difference-equation driver requires a 2-d model")
    if eps is None:
        eps = 1.0 / np.sqrt(n_steps)
    R = n_paths
    kernel = StepKernel(model, R)
    uniforms = ShardUniforms(seed, R, base_stream, _ensemble_block(R))
    cells = np.full(R, start_cell, dtype=np.int64)
    u = np.full(R, float(u0))
    f, g = vf.f, vf.g
    scale = eps * increment_scale
    for step in range(n_steps):
        uni = uniforms.next_row()
        kernel.advance(uni, cells)
        u = u + scale * (f(u) * kernel.dx[0] + g(u) * kernel.dx[1])
        if not np.all(np.isfinite(u)):
            raise NonFinite(step + 1)
    return u


def corrected_euler(vf: VectorField1D, u0: float, brownian_increments, dt: float,
                    K: float, gamma: float) -> np.ndarray:
    """Euler scheme with the variance and area-drift correction terms.

    brownian_increments is an (n, 2) array whose entries should have variance
    about dt per component (the caller's responsibility).
    """
    db = np.asarray(brownian_increments, dtype=np.float64)
    if db.ndim != 2 or db.shape[1] != 2:
        raise ValueError("brownian_increments must be an (n, 2) array")
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = db.shape[0]
    out = np.empty(n + 1)
    out[0] = u = float(u0)
    for k in range(n):
        u = u + _euler_increment(vf, u, db[k, 0], db[k, 1], dt, K, gamma)
        if not np.isfinite(u):
            raise NonFinite(k + 1, u)
        out[k + 1] = u
    return out


def _euler_increment(vf, u, db1, db2, dt, K, gamma):
    f = vf.f(u)
    g = vf.g(u)
    fp = vf.f_prime(u)
    gp = vf.g_prime(u)
    return (f * db1 + g * db2
            + 0.5 * (fp * f + gp * g) * K * dt
            + 0.5 * (fp * g - f * gp) * gamma * dt)


def corrected_euler_ensemble(vf: VectorField1D, u0: float, n_steps: int, dt: float,
                             K: float, gamma: float, n_paths: int, seed: int,
                             base_stream: int = 0) -> np.ndarray:
    """Terminal values U_1 of the corrected Euler scheme over n_paths paths
    with internally generated Gaussian increments of variance dt."""
    R = n_paths
    shards = (R + ENSEMBLE_SHARD - 1) // ENSEMBLE_SHARD
    gens = [rng.stream_generator(seed, base_stream + s, rng.EULER) for s in range(shards)]
    u = np.full(R, float(u0))
    root_dt = np.sqrt(dt)
    db = np.empty((R, 2))
    for step in range(n_steps):
        for s, gen in enumerate(gens):
            lo = s * ENSEMBLE_SHARD
            hi = min(lo + ENSEMBLE_SHARD, R)
            db[lo:hi] = gen.standard_normal((hi - lo, 2))
        u = u + _euler_increment(vf, u, root_dt * db[:, 0], root_dt * db[:, 1], dt, K, gamma)
        if not np.all(np.isfinite(u)):
            raise NonFinite(step + 1)
    return u


def left_point_euler_constants(gamma_whitened: float, step_second_moment: np.ndarray,
                               sigma2_step: float) -> tuple[float, float]:
    """Effective (K, gamma) for `corrected_euler` so that it matches the
    difference scheme driven by the whitened chain.

    The left-point recursion sees the per-step level-2 drift
    sym = 1/2 (I - E[dX dX^T]/sigma2) and antisym = Gamma J in whitened units;
    in the (K, gamma) parametrization of the scheme this is

        K = 1 - tr(E[dX dX^T]) / (d * sigma2),     gamma = -2 * Gamma,

    the sign reflecting that the scheme weights the (earlier-y, later-x) pair
    with f'g while the anomaly is reported in the (x, y) orientation.
    Requires E[dX dX^T] to be (numerically) a multiple of the identity, as it
    is for the built-in rotating family.
    """
    m2 = np.asarray(step_second_moment, dtype=np.float64)
    d = m2.shape[0]
    q = float(np.trace(m2)) / (d * sigma2_step)
    iso_err = np.abs(m2 / sigma2_step - q * np.eye(d)).max()
    if iso_err > 1e-8 * max(1.0, q):
        raise ValueError("per-step second moment is not isotropic after whitening; "
                         "the scalar (K, gamma) parametrization does not apply")
    return 1.0 - q, -2.0 * gamma_whitened


# ---------------------------------------------------------------------------
# SU(2)

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)

_I2 = np.eye(2, dtype=np.complex128)


@dataclass(frozen=True)
class SU2State:
    """A 2x2 special unitary matrix."""

    U: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=np.complex128)
        if U.shape != (2, 2):
            raise ValueError("U must be 2x2")
        object.__setattr__(self, "U", U)

    @classmethod
    def identity(cls) -> "SU2State":
        return cls(_I2.copy())

    def unitarity_defect(self) -> float:
        return float(np.abs(self.U @ self.U.conj().T - _I2).max())

    def det_defect(self) -> float:
        return float(abs(np.linalg.det(self.U) - 1.0))

    def check(self, tol: float = 1e-10) -> bool:
        return self.unitarity_defect() <= tol and self.det_defect() <= tol


def su2_from_vector(delta_x) -> np.ndarray:
    """Hermitian traceless matrix x s1 + y s2 + z s3 of a 3-vector."""
    x, y, z = (float(c) for c in delta_x)
    return x * PAULI[0] + y * PAULI[1] + z * PAULI[2]


def su2_cayley_step(state: SU2State, delta_x, eps: float) -> SU2State:
    """One Cayley-transform step U <- U (I + i eps H)(I - i eps H)^{-1}.

    H = delta_x . sigma is Hermitian traceless with H^2 = |delta_x|^2 I, so
    the update has the closed form ((1 - e2) I + 2 i eps H) / (1 + e2) with
    e2 = eps^2 |delta_x|^2, which is exactly special unitary.
    """
    h = su2_from_vector(delta_x)
    e2 = eps * eps * float(np.real(np.vdot(delta_x, delta_x)))
    denom = 1.0 + e2
    if not np.isfinite(denom) or abs(denom) < 1e-300:
        raise SingularStep(f"Cayley denominator {denom!r} for eps={eps}")
    factor = ((1.0 - e2) * _I2 + 2j * eps * h) / denom
    return SU2State(state.U @ factor)
