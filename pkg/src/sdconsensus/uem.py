"""Closed-form analysis of the consensus-carrying mode (eigenvalue 1).

For that mode the sampled dynamics reduce to a scalar second-order equation
whose velocity obeys the homogeneous problem u'' + k_d u' + k_p u = 0 with
u(0) = 1, u'(0) = 0.  One interval of length T then maps

    [z; zdot]  ->  [[1, mu(T)], [0, beta(T)]] [z; zdot]

with beta(T) = u(T) (velocity contraction, |beta| < 1 for T > 0) and
mu(T) = integral of u over [0, T] (position pickup per unit velocity).
Chaining intervals gives the running product whose (1,2) entry converges to
the final common position offset.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Gains, SamplingSchedule, _damped_basis
from .errors import ConvergenceError

MAX_INTERVALS = 10**6
_BOUND_GRID = 2048


def beta(gains: Gains, t: float) -> float:
    """Velocity contraction factor over one interval of length t >= 0."""
    if t < 0.0:
        raise ValueError(f"interval length must be >= 0, got {t}")
    c0, c1 = _damped_basis(gains, t)
    return c0 + (gains.k_d / 2.0) * c1


def mu(gains: Gains, t: float) -> float:
    """Position increment per unit sampled velocity over one interval of length t >= 0.

    Equals the integral of the velocity response u over [0, t]; evaluated in
    closed form via mu = (k_d/k_p) (1 - beta(t)) + exp(-nu t) sinh-part.
    """
    if t < 0.0:
        raise ValueError(f"interval length must be >= 0, got {t}")
    c0, c1 = _damped_basis(gains, t)
    b = c0 + (gains.k_d / 2.0) * c1
    return (gains.k_d / gains.k_p) * (1.0 - b) + c1


def mu_bound(gains: Gains, tau_bar: float) -> float:
    """Upper bound on |mu| over interval lengths in (0, tau_bar].

    Dense-grid supremum plus the long-interval limit k_d/k_p (covers grid
    resolution for large tau_bar).
    """
    if not tau_bar > 0.0:
        raise ValueError(f"tau_bar must be > 0, got {tau_bar}")
    grid = np.linspace(tau_bar / _BOUND_GRID, tau_bar, _BOUND_GRID)
    sup = max(abs(mu(gains, float(t))) for t in grid)
    return max(sup, gains.k_d / gains.k_p)


@dataclass(frozen=True)
class UemStep:
    """One-interval factors of the consensus mode."""

    beta: float
    mu: float
    length: float


def step(gains: Gains, t: float) -> UemStep:
    return UemStep(beta=beta(gains, t), mu=mu(gains, t), length=float(t))


@dataclass(frozen=True)
class UemProduct:
    """Running product of one-interval maps, upper triangular with unit (1,1).

    ``position_gain`` is the (1,2) entry (sum of mu_m times the partial beta
    products), ``velocity_factor`` the (2,2) entry (product of all betas);
    the (2,1) entry is 0 and the (1,1) entry is 1 structurally.
    """

    position_gain: float
    velocity_factor: float
    intervals: int

    def as_matrix(self) -> np.ndarray:
        return np.array([[1.0, self.position_gain], [0.0, self.velocity_factor]])

    def consensus_from(self, z0: float, zdot0: float) -> float:
        return z0 + self.position_gain * zdot0


def uem_product(gains: Gains, schedule: SamplingSchedule, k: int) -> UemProduct:
    """Left-accumulated product of the first k one-interval maps of the schedule."""
    gaps = schedule.gaps
    if not (0 <= k <= gaps.size):
        raise ValueError(f"k must be in 0..{gaps.size}, got {k}")
    pi = 0.0
    bp = 1.0
    for m in range(k):
        t = float(gaps[m])
        pi += mu(gains, t) * bp
        bp *= beta(gains, t)
    return UemProduct(position_gain=pi, velocity_factor=bp, intervals=k)


def consensus_value(gains: Gains, schedule: SamplingSchedule, z0: float, zdot0: float,
                    tolerance: float = 1e-9) -> float:
    """Limit of the consensus-mode position: z0 + (converged position gain) * zdot0.

    Iterates the interval product until the residual bound
    |prod beta| * sup|mu| drops below the tolerance.  Seeded schedules are
    extended deterministically as needed; an explicit schedule that runs out
    of intervals first raises ConvergenceError.
    """
    if not tolerance > 0.0:
        raise ValueError(f"tolerance must be > 0, got {tolerance}")
    if zdot0 == 0.0:
        return float(z0)
    bound = mu_bound(gains, schedule.tau_bar)
    pi = 0.0
    bp = 1.0
    for m, gap in enumerate(schedule.gap_stream()):
        if m >= MAX_INTERVALS:
            raise ConvergenceError(
                f"consensus value did not converge within {MAX_INTERVALS} intervals "
                f"(residual bound {abs(bp) * bound:.3e})"
            )
        pi += mu(gains, gap) * bp
        bp *= beta(gains, gap)
        if abs(bp) * bound < tolerance:
            return float(z0 + pi * zdot0)
    raise ConvergenceError(
        f"schedule exhausted after {schedule.gaps.size} intervals before the "
        f"residual bound {abs(bp) * bound:.3e} reached tolerance {tolerance}"
    )
