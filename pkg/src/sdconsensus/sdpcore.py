"""Small dense semidefinite feasibility engine.

The problem solved here: given a family of affine symmetric-matrix maps
``F_c(theta)`` that must all be strictly negative definite, find a point
``theta`` with ``max_c lambda_max(F_c(theta)) <= -eps_margin`` on the
normalization slice ``sum(theta[i] for i in normalization) == 1``.  The maps
are linear in ``theta``, so feasibility is scale invariant and the slice
removes the scale freedom.

Search method: projected subgradient descent on the max-eigenvalue objective
(subgradient of ``lambda_max`` at the active constraint is ``v^T C_j v`` per
coordinate, ``v`` the leading eigenvector), with diminishing steps ``c/sqrt(k)``
and a log-sum-exp smoothed phase as fallback when the plain method stalls.

Every accepted point is re-verified with the cyclic-Jacobi eigensolver below,
independently of any solver state.  A ``not_found`` outcome is only a failed
search, never a proof of infeasibility.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

EPS_MARGIN = 1e-6
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
DEFAULT_BUDGET = 200_000
DEFAULT_RESTARTS = 8
STALL_WINDOW = 10_000
MAX_EIG_DIM = 16


def jacobi_eigh(matrix, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with eigenvalues ascending and orthonormal eigenvectors
    as the columns of ``V``.  Convergence criterion: off-diagonal Frobenius
    norm below ``tol`` relative to the input scale.

    Raises ConvergenceError (reporting the residual) if ``max_sweeps`` cyclic
    sweeps do not reach the tolerance.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    a = 0.5 * (a + a.T)
    m = a.shape[0]
    v = np.eye(m)
    if m == 1:
        return a[0, :1].copy(), v

    scale = max(1.0, math.sqrt(float(np.sum(a * a))))
    threshold = tol * scale
    # rotations smaller than this cannot push the off-norm back above threshold
    skip = threshold * 1e-3

    def off_norm(mat):
        stripped = mat.copy()
        np.fill_diagonal(stripped, 0.0)
        return float(np.linalg.norm(stripped))

    for _ in range(max_sweeps):
        off = off_norm(a)
        if off <= threshold:
            order = np.argsort(np.diag(a), kind="stable")
            return np.diag(a)[order].copy(), v[:, order].copy()
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:  # tau*tau would overflow; asymptotic root
                    t = 0.5 / tau
                elif tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = 1.0 / (tau - math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0

                vec_p = v[:, p].copy()
                v[:, p] = c * vec_p - s * v[:, q]
                v[:, q] = s * vec_p + c * v[:, q]

    off = off_norm(a)
    raise ConvergenceError(
        f"Jacobi sweeps exhausted ({max_sweeps}); off-diagonal residual {off:.3e} "
        f"above tolerance {threshold:.3e}"
    )


def _check_symmetric(matrix: np.ndarray, what: str = "matrix") -> None:
    asym = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if asym > 1e-12 * scale:
        raise ValueError(f"{what} is not symmetric (asymmetry {asym:.3e})")


def max_eig_sym(matrix):
    """Largest eigenvalue and a unit eigenvector of a symmetric matrix.

    Rejects matrices larger than 16x16 or asymmetric beyond 1e-12 (relative).
    The eigenvector sign is canonicalized (largest-magnitude entry positive)
    so results are deterministic.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] > MAX_EIG_DIM:
        raise ValueError(f"matrix dimension {a.shape[0]} exceeds limit {MAX_EIG_DIM}")
    _check_symmetric(a)
    w, vecs = jacobi_eigh(a)
    vec = vecs[:, -1].copy()
    k = int(np.argmax(np.abs(vec)))
    if vec[k] < 0.0:
        vec = -vec
    return float(w[-1]), vec


@dataclass(frozen=True, eq=False)
class AffineMatrixConstraint:
    """One affine symmetric-matrix constraint ``constant + sum_j theta_j * coeffs[j] < 0``."""

    constant: np.ndarray  # (m, m) symmetric
    coeffs: np.ndarray    # (d, m, m), each slice symmetric

    def __post_init__(self):
        constant = np.array(self.constant, dtype=float)
        coeffs = np.array(self.coeffs, dtype=float)
        if constant.ndim != 2 or constant.shape[0] != constant.shape[1]:
            raise ValueError(f"constant term must be square, got {constant.shape}")
        m = constant.shape[0]
        if coeffs.ndim != 3 or coeffs.shape[1:] != (m, m):
            raise ValueError(f"coefficient stack must be (d, {m}, {m}), got {coeffs.shape}")
        _check_symmetric(constant, "constant term")
        for j in range(coeffs.shape[0]):
            _check_symmetric(coeffs[j], f"coefficient {j}")
        object.__setattr__(self, "constant", constant)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    @property
    def nvars(self) -> int:
        return self.coeffs.shape[0]

    def evaluate(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return self.constant + np.tensordot(theta, self.coeffs, axes=1)


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    status: str               # "feasible" | "not_found"
    point: np.ndarray
    worst_margin: float       # max over constraints of lambda_max at point
    iterations: int

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def _verified_margins(constraints, theta) -> np.ndarray:
    """Independent margin check: Jacobi lambda_max of every constraint at theta."""
    return np.array([max_eig_sym(c.evaluate(theta))[0] for c in constraints])


def feasibility(
    constraints,
    normalization,
    budget: int = DEFAULT_BUDGET,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    initial_points=None,
    eps_margin: float = EPS_MARGIN,
    step_scale: float = 0.5,
) -> FeasibilityResult:
    """Search for a strictly feasible point of a negative-definite constraint system.

    ``normalization`` is the index set whose coordinates must sum to 1 (for the
    certification problems this pins trace(P) = 1).  ``budget`` is the total
    iteration cap, split evenly across ``restarts`` (the first starts are the
    caller-supplied ``initial_points``, then a deterministic warm start, then
    seeded random points).  Identical seed and budget give identical results.
    """
    constraints = list(constraints)
    if not constraints:
        raise ValueError("constraint list is empty")
    d = constraints[0].nvars
    for c in constraints:
        if c.nvars != d:
            raise ValueError("constraints disagree on the number of variables")
    norm_idx = np.array(sorted(set(int(i) for i in normalization)), dtype=int)
    if norm_idx.size == 0:
        raise ValueError("normalization index set is empty")
    if norm_idx.min() < 0 or norm_idx.max() >= d:
        raise ValueError("normalization index out of range")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")

    a = np.zeros(d)
    a[norm_idx] = 1.0
    a_dot = float(a @ a)

    def project(theta):
        return theta + a * ((1.0 - float(a @ theta)) / a_dot)

    # flat layouts: evaluate via theta @ flat, subgradient via flat @ (v kron v)
    flats = [c.coeffs.reshape(d, -1) for c in constraints]
    consts = [c.constant.reshape(-1) for c in constraints]
    dims = [c.dim for c in constraints]

    starts = []
    if initial_points is not None:
        for p in initial_points:
            p = np.asarray(p, dtype=float)
            if p.shape != (d,):
                raise ValueError(f"initial point has shape {p.shape}, expected ({d},)")
            starts.append(project(p.copy()))
    default = np.zeros(d)
    default[norm_idx] = 1.0 / norm_idx.size
    starts.append(default)
    rng = np.random.default_rng(seed)
    while len(starts) < restarts:
        starts.append(project(rng.normal(0.0, 0.5, size=d)))
    starts = starts[:restarts]

    per_restart = max(1, budget // len(starts))
    total_iters = 0
    best_f = math.inf
    best_theta = starts[0].copy()

    for theta0 in starts:
        theta = theta0.copy()
        f_restart = math.inf
        no_improve = 0
        smoothed = False
        eta = 1e-3

        for k in range(1, per_restart + 1):
            total_iters += 1
            lam_max = np.empty(len(constraints))
            eig_cache = []
            for i, (flat, const, m) in enumerate(zip(flats, consts, dims)):
                mat = (const + theta @ flat).reshape(m, m)
                w, vecs = np.linalg.eigh(mat)
                lam_max[i] = w[-1]
                eig_cache.append((w, vecs))
            f = float(lam_max.max())
            active = int(np.argmax(lam_max))

            if f < best_f:
                best_f = f
                best_theta = theta.copy()
            if f <= -eps_margin:
                margins = _verified_margins(constraints, theta)
                if float(margins.max()) <= -eps_margin:
                    return FeasibilityResult("feasible", theta.copy(),
                                             float(margins.max()), total_iters)

            if f < f_restart - 1e-12:
                f_restart = f
                no_improve = 0
            else:
                no_improve += 1
                if not smoothed and no_improve >= STALL_WINDOW:
                    smoothed = True
                    eta = 1e-3
                elif smoothed and no_improve % (STALL_WINDOW // 2) == 0:
                    eta = max(1e-6, eta * 0.1)

            if not smoothed:
                w, vecs = eig_cache[active]
                v = vecs[:, -1]
                g = flats[active] @ np.kron(v, v)
            else:
                g = np.zeros(d)
                z = 0.0
                for (w, vecs), flat in zip(eig_cache, flats):
                    wts = np.exp((w - f) / eta)
                    z += float(wts.sum())
                    weighted = (vecs * wts) @ vecs.T
                    g += flat @ weighted.reshape(-1)
                g /= z

            g -= a * (float(a @ g) / a_dot)
            gnorm = float(np.linalg.norm(g))
            if gnorm < 1e-14:
                theta = project(theta + rng.normal(0.0, 1e-3, size=d))
                continue
            theta = project(theta - (step_scale / math.sqrt(k)) * (g / gnorm))

    worst = float(_verified_margins(constraints, best_theta).max())
    return FeasibilityResult("not_found", best_theta, worst, total_iters)
