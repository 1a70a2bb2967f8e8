"""Independent numerical oracles for the test suite.

These deliberately avoid the closed-form code paths under test: the matrix
exponential oracle is a scaling-and-squaring Taylor series, the propagator
oracle is Richardson-extrapolated RK4 integration, and the eigenvalue oracle
isolates characteristic-polynomial roots in exact rational arithmetic.
"""
from __future__ import annotations

import numpy as np
import sympy as sp


def expm_series(a: np.ndarray, tol: float = 1e-16, max_terms: int = 120) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring of the Taylor series."""
    a = np.asarray(a, dtype=float)
    norm = float(np.abs(a).sum(axis=1).max())
    squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-300)))) + 1) if norm > 0.5 else 0
    b = a / (2.0 ** squarings)
    result = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, max_terms):
        term = term @ b / k
        result = result + term
        if float(np.abs(term).max()) < tol:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def _rk4_path(f, y0: np.ndarray, t_end: float, steps: int) -> np.ndarray:
    y = np.array(y0, dtype=float)
    h = t_end / steps
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def integrate_linear(f, y0, t_end: float, tol: float = 1e-12, start_steps: int = 32):
    """Richardson-extrapolated RK4: double the step count until converged."""
    steps = start_steps
    prev = _rk4_path(f, y0, t_end, steps)
    for _ in range(14):
        steps *= 2
        cur = _rk4_path(f, y0, t_end, steps)
        if float(np.abs(cur - prev).max()) < tol:
            return (16.0 * cur - prev) / 15.0
        prev = cur
    return prev


def integrate_mode(a_mat, b_mat, lam: float, y0, dt: float, tol: float = 1e-12):
    """Integrate dy/dt = A y + lam B y0 (held input) over [0, dt]."""
    a_mat = np.asarray(a_mat, dtype=float)
    forcing = lam * (np.asarray(b_mat, dtype=float) @ np.asarray(y0, dtype=float))
    return integrate_linear(lambda y: a_mat @ y + forcing, y0, dt, tol=tol)


def velocity_response(k_p: float, k_d: float, t_end: float, tol: float = 1e-12):
    """Integrate u'' + k_d u' + k_p u = 0, u(0)=1, u'(0)=0, plus m = integral of u.

    Returns (u(t_end), u'(t_end), m(t_end)).
    """
    def f(state):
        u, du, _ = state
        return np.array([du, -k_d * du - k_p * u, u])

    out = integrate_linear(f, np.array([1.0, 0.0, 0.0]), t_end, tol=tol)
    return float(out[0]), float(out[1]), float(out[2])


def charpoly_eigenvalues_rational(entries) -> list:
    """Exact eigenvalues (descending floats) of a matrix with rational entries,
    via characteristic-polynomial real-root isolation in sympy."""
    mat = sp.Matrix(entries)
    roots = mat.charpoly().all_roots()
    vals = [complex(r.evalf(25)) for r in roots]
    assert all(abs(v.imag) < 1e-20 for v in vals), "expected a real spectrum"
    return sorted((v.real for v in vals), reverse=True)


def weighted_adjacency_eigenvalues_exact(topology) -> list:
    """Exact spectrum of inv(D) A for an integer-degree topology."""
    n = topology.n
    entries = [[sp.Rational(int(topology.adjacency[i, j]), int(topology.degrees[i]))
                for j in range(n)] for i in range(n)]
    return charpoly_eigenvalues_rational(entries)


def random_rational_symmetric(rng, n: int, denom: int = 64) -> np.ndarray:
    """Random symmetric matrix with exactly representable small-rational entries."""
    num = rng.integers(-2 * denom, 2 * denom + 1, size=(n, n))
    sym = (num + num.T).astype(float) / denom
    return sym


def symmetric_eigenvalues_exact(matrix: np.ndarray) -> list:
    """Exact eigenvalues of a float symmetric matrix (entries taken exactly)."""
    n = matrix.shape[0]
    entries = [[sp.Rational(matrix[i, j]) for j in range(n)] for i in range(n)]
    return charpoly_eigenvalues_rational(entries)


def fit_log_slope(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log(values) against time (positive values only)."""
    mask = values > 1e-300
    t = times[mask]
    y = np.log(values[mask])
    t_mean = t.mean()
    return float(((t - t_mean) * (y - y.mean())).sum() / ((t - t_mean) ** 2).sum())
