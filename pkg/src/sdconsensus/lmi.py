"""Exponential-decay certification of the sampled consensus modes.

A mode with coupling eigenvalue ``lam`` is certified to decay at rate alpha
when the two linear matrix inequalities below (negative definite) admit
symmetric positive definite P, S, R and a free 4x2 block matrix Q:

  LMI1 = [[Psi11(tau_bar, alpha), Psi12(tau_bar, alpha)],
          [      *              , Psi22(tau_bar, alpha)]]

  LMI2 = [[Psi11(0, alpha), Psi12(0, alpha), tau_bar Q1],
          [      *        , Psi22(0, alpha), tau_bar Q2],
          [      *        ,       *        , -tau_bar (1 - 2 alpha tau_bar) R]]

The blocks come from an energy functional over the current interval
(quadratic state term, a held-difference term and a derivative-history
integral, the last two weighted by the time left to the next sample); the
bordered form is the Schur-complement counterpart of the inequality at the
far end of the interval, which is why alpha < 1/(2 tau_bar) is required.
Feasibility of both at every coupling eigenvalue except 1 certifies network
consensus with decay rate alpha.

``lk_check`` evaluates the functional itself along an exactly propagated
interval and verifies the certified exponential decay numerically.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Coupling, Gains
from .graph import Topology, spectrum
from .sdpcore import (
    EPS_MARGIN,
    AffineMatrixConstraint,
    FeasibilityResult,
    feasibility,
    max_eig_sym,
)

PSI12_VARIANTS = ("lemma", "derivation")
DEDUP_TOL = 1e-9
ALPHA_BRACKET_LO = 1e-3
N_VARS = 17  # 3 + 3 + 3 for P, S, R and 8 for Q


@dataclass(frozen=True, eq=False)
class LmiVariables:
    """Decision variables of the certification problem."""

    P: np.ndarray
    S: np.ndarray
    R: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray

    def to_vector(self) -> np.ndarray:
        p, s, r = self.P, self.S, self.R
        return np.array([
            p[0, 0], p[0, 1], p[1, 1],
            s[0, 0], s[0, 1], s[1, 1],
            r[0, 0], r[0, 1], r[1, 1],
            *self.Q1.reshape(-1), *self.Q2.reshape(-1),
        ])

    @classmethod
    def from_vector(cls, theta) -> "LmiVariables":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (N_VARS,):
            raise ValueError(f"expected {N_VARS} variables, got shape {theta.shape}")

        def sym(a, b, c):
            return np.array([[a, b], [b, c]])

        return cls(
            P=sym(theta[0], theta[1], theta[2]),
            S=sym(theta[3], theta[4], theta[5]),
            R=sym(theta[6], theta[7], theta[8]),
            Q1=theta[9:13].reshape(2, 2).copy(),
            Q2=theta[13:17].reshape(2, 2).copy(),
        )

    @classmethod
    def zeros(cls) -> "LmiVariables":
        return cls.from_vector(np.zeros(N_VARS))


# indices of the diagonal entries of P in the packed vector (trace normalization)
P_TRACE_INDICES = (0, 2)


def _sym_pair(x: np.ndarray) -> np.ndarray:
    return x + x.T


def _sym_exact(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.T)


def psi_blocks(gains: Gains, variant: Coupling, lam: float, tau_eff: float, alpha: float,
               variables: LmiVariables, psi12_variant: str = "lemma"):
    """The three 2x2 blocks of the quadratic-form matrix at remaining time tau_eff.

    ``psi12_variant`` selects the cross block: "lemma" couples the held state
    through B (the form the certificates use); "derivation" is an alternative
    assembly kept for comparison that reuses the state-block kernel.
    """
    if tau_eff < 0.0:
        raise ValueError(f"tau_eff must be >= 0, got {tau_eff}")
    if psi12_variant not in PSI12_VARIANTS:
        raise ValueError(f"psi12_variant must be one of {PSI12_VARIANTS}")
    a = gains.state_matrix()
    b = variant.input_matrix(gains)
    p, s, r, q1, q2 = variables.P, variables.S, variables.R, variables.Q1, variables.Q2

    psi11 = (
        _sym_pair(p @ a) - s - _sym_pair(q1)
        + tau_eff * (_sym_pair(s @ a) + _sym_exact(a.T @ r @ a) + 2.0 * alpha * s)
        + 2.0 * alpha * p - 2.0 * alpha * r
    )
    if psi12_variant == "lemma":
        cross = -a.T @ s + lam * (s @ b) + lam * (a.T @ r @ b) - 2.0 * alpha * s
    else:
        cross = _sym_pair(s @ a) + _sym_exact(a.T @ r @ a) - 2.0 * alpha * s
    psi12 = lam * (p @ b) + s + 2.0 * alpha * r + q1 - q2.T + tau_eff * cross
    # the held-state block receives the same (-1 + 2 alpha tau_eff) difference-term
    # kernel as the other two blocks, hence the -2 alpha S inside the bracket
    psi22 = (
        -s - 2.0 * alpha * r + _sym_pair(q2)
        - tau_eff * (lam * _sym_pair(s @ b) - lam * lam * _sym_exact(b.T @ r @ b)
                     - 2.0 * alpha * s)
    )
    return psi11, psi12, psi22


def lmi_matrices(gains: Gains, variant: Coupling, lam: float, tau_bar: float, alpha: float,
                 variables: LmiVariables, psi12_variant: str = "lemma"):
    """Assemble the 4x4 and bordered 6x6 inequality matrices (exactly symmetric)."""
    if not tau_bar > 0.0:
        raise ValueError(f"tau_bar must be > 0, got {tau_bar}")
    if not 1.0 - 2.0 * alpha * tau_bar > 0.0:
        raise ValueError(
            f"alpha={alpha} violates alpha < 1/(2 tau_bar) = {0.5 / tau_bar}; "
            "the history weight (1 - 2 alpha tau_bar) R must stay positive definite"
        )
    p11, p12, p22 = psi_blocks(gains, variant, lam, tau_bar, alpha, variables, psi12_variant)
    lmi1 = np.block([[p11, p12], [p12.T, p22]])

    z11, z12, z22 = psi_blocks(gains, variant, lam, 0.0, alpha, variables, psi12_variant)
    tq1 = tau_bar * variables.Q1
    tq2 = tau_bar * variables.Q2
    corner = -tau_bar * (1.0 - 2.0 * alpha * tau_bar) * variables.R
    lmi2 = np.block([
        [z11, z12, tq1],
        [z12.T, z22, tq2],
        [tq1.T, tq2.T, corner],
    ])
    return lmi1, lmi2


def _neg_matrix_constraint(which: str) -> AffineMatrixConstraint:
    """-P, -S or -R < 0 as an affine constraint in the packed variables."""
    coeffs = np.zeros((N_VARS, 2, 2))
    for j in range(N_VARS):
        e = np.zeros(N_VARS)
        e[j] = 1.0
        v = LmiVariables.from_vector(e)
        coeffs[j] = -getattr(v, which)
    return AffineMatrixConstraint(constant=np.zeros((2, 2)), coeffs=coeffs)


def build_constraints(gains: Gains, variant: Coupling, lam: float, tau_bar: float,
                      alpha: float, psi12_variant: str = "lemma"):
    """The five-block constraint system (-P, -S, -R, LMI1, LMI2), all affine in
    the 17 packed variables with zero constant terms."""
    systems = [_neg_matrix_constraint(w) for w in ("P", "S", "R")]
    coeffs1 = np.zeros((N_VARS, 4, 4))
    coeffs2 = np.zeros((N_VARS, 6, 6))
    for j in range(N_VARS):
        e = np.zeros(N_VARS)
        e[j] = 1.0
        m1, m2 = lmi_matrices(gains, variant, lam, tau_bar, alpha,
                              LmiVariables.from_vector(e), psi12_variant)
        coeffs1[j] = m1
        coeffs2[j] = m2
    systems.append(AffineMatrixConstraint(constant=np.zeros((4, 4)), coeffs=coeffs1))
    systems.append(AffineMatrixConstraint(constant=np.zeros((6, 6)), coeffs=coeffs2))
    return systems


@dataclass(frozen=True, eq=False)
class ModeCertificate:
    """Feasible variables for one coupling eigenvalue, with verified margins.

    ``margins`` holds the max eigenvalue of (-P, -S, -R, LMI1, LMI2) at the
    accepted point, each at most -EPS_MARGIN.
    """

    lam: float
    alpha: float
    variables: LmiVariables
    margins: np.ndarray
    iterations: int
    multiplicity: int = 1


@dataclass(frozen=True, eq=False)
class ConsensusCertificate:
    """Per-mode certificates covering every non-unit coupling eigenvalue."""

    topology_digest: str
    gains: Gains
    variant: Coupling
    tau_bar: float
    alpha: float
    eigenvalues: np.ndarray          # all non-unit eigenvalues, descending
    modes: tuple                     # one ModeCertificate per distinct eigenvalue


@dataclass(frozen=True, eq=False)
class NetworkCertification:
    certificate: ConsensusCertificate | None
    failed_lambda: float | None = None

    @property
    def feasible(self) -> bool:
        return self.certificate is not None


def topology_digest(topology: Topology) -> str:
    h = hashlib.sha256()
    h.update(np.int64(topology.n).tobytes())
    h.update(topology.adjacency.astype(np.uint8).tobytes())
    return h.hexdigest()[:16]


def _default_start() -> np.ndarray:
    return LmiVariables(
        P=0.5 * np.eye(2), S=0.5 * np.eye(2), R=0.5 * np.eye(2),
        Q1=np.zeros((2, 2)), Q2=np.zeros((2, 2)),
    ).to_vector()


def verify_mode_certificate(gains: Gains, variant: Coupling, tau_bar: float,
                            cert: ModeCertificate, psi12_variant: str = "lemma") -> np.ndarray:
    """Independent margin re-check of a certificate (fresh assembly + Jacobi)."""
    systems = build_constraints(gains, variant, cert.lam, tau_bar, cert.alpha, psi12_variant)
    theta = cert.variables.to_vector()
    return np.array([max_eig_sym(c.evaluate(theta))[0] for c in systems])


def certify_mode(gains: Gains, variant: Coupling, lam: float, tau_bar: float, alpha: float,
                 budget: int = 200_000, restarts: int = 8, seed: int = 0,
                 psi12_variant: str = "lemma", warm_start=None) -> ModeCertificate | None:
    """Search a decay certificate for one mode; None means not found (which is
    not a proof of infeasibility)."""
    if not (-1.0 <= lam < 1.0):
        raise ValueError(f"mode eigenvalue must lie in [-1, 1), got {lam}")
    if not tau_bar > 0.0:
        raise ValueError(f"tau_bar must be > 0, got {tau_bar}")
    if not (0.0 < alpha < 0.5 / tau_bar):
        raise ValueError(
            f"alpha must lie in (0, 1/(2 tau_bar)) = (0, {0.5 / tau_bar}), got {alpha}"
        )
    systems = build_constraints(gains, variant, lam, tau_bar, alpha, psi12_variant)
    initial = []
    if warm_start is not None:
        initial.append(np.asarray(warm_start, dtype=float))
    initial.append(_default_start())
    result = feasibility(systems, normalization=P_TRACE_INDICES, budget=budget,
                         restarts=restarts, seed=seed, initial_points=initial)
    if not result.feasible:
        return None
    variables = LmiVariables.from_vector(result.point)
    margins = np.array([max_eig_sym(c.evaluate(result.point))[0] for c in systems])
    return ModeCertificate(lam=float(lam), alpha=float(alpha), variables=variables,
                           margins=margins, iterations=result.iterations)


def _distinct_modes(eigenvalues: np.ndarray):
    """Group the non-unit eigenvalues (descending) into clusters within DEDUP_TOL."""
    groups = []
    for lam in eigenvalues:
        if groups and abs(groups[-1][0] - lam) <= DEDUP_TOL:
            groups[-1][1] += 1
        else:
            groups.append([float(lam), 1])
    return groups


def certify_network(topology: Topology, gains: Gains, variant: Coupling, tau_bar: float,
                    alpha: float, budget: int = 200_000, restarts: int = 8, seed: int = 0,
                    psi12_variant: str = "lemma", warm_starts=None) -> NetworkCertification:
    """Certify every non-unit coupling eigenvalue (deduplicated within 1e-9).

    ``warm_starts`` optionally maps the distinct-mode index to a packed
    variable vector (used by the decay-rate search to reuse feasible points).
    """
    spec = spectrum(topology)
    non_unit = spec.eigenvalues[1:]
    if non_unit.size and non_unit.max() >= 1.0 - DEDUP_TOL:
        raise ValueError("unit eigenvalue is not simple; topology must be connected")
    modes = []
    for idx, (lam, mult) in enumerate(_distinct_modes(non_unit)):
        warm = None if warm_starts is None else warm_starts.get(idx)
        cert = certify_mode(gains, variant, lam, tau_bar, alpha, budget=budget,
                            restarts=restarts, seed=seed, psi12_variant=psi12_variant,
                            warm_start=warm)
        if cert is None:
            return NetworkCertification(certificate=None, failed_lambda=lam)
        modes.append(ModeCertificate(lam=cert.lam, alpha=cert.alpha,
                                     variables=cert.variables, margins=cert.margins,
                                     iterations=cert.iterations, multiplicity=mult))
    certificate = ConsensusCertificate(
        topology_digest=topology_digest(topology),
        gains=gains, variant=variant, tau_bar=float(tau_bar), alpha=float(alpha),
        eigenvalues=non_unit.copy(), modes=tuple(modes),
    )
    return NetworkCertification(certificate=certificate)


@dataclass(frozen=True, eq=False)
class MaxAlphaResult:
    alpha: float | None
    certificate: ConsensusCertificate | None

    @property
    def found(self) -> bool:
        return self.alpha is not None


def max_alpha(topology: Topology, gains: Gains, variant: Coupling, tau_bar: float,
              tolerance: float = 1e-3, budget: int = 200_000, restarts: int = 8,
              seed: int = 0, psi12_variant: str = "lemma") -> MaxAlphaResult:
    """Largest certifiable decay rate, by bisection over (0, 1/(2 tau_bar)).

    The last feasible point of each mode warm-starts the next probe, so the
    certified rate is monotone in the search.  Returns alpha=None when even
    the lower bracket cannot be certified.
    """
    if not tolerance > 0.0:
        raise ValueError(f"tolerance must be > 0, got {tolerance}")
    lo = ALPHA_BRACKET_LO
    hi = 0.5 / tau_bar
    outcome = certify_network(topology, gains, variant, tau_bar, lo, budget=budget,
                              restarts=restarts, seed=seed, psi12_variant=psi12_variant)
    if not outcome.feasible:
        return MaxAlphaResult(alpha=None, certificate=None)
    best = outcome.certificate
    warm = {i: m.variables.to_vector() for i, m in enumerate(best.modes)}
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        outcome = certify_network(topology, gains, variant, tau_bar, mid, budget=budget,
                                  restarts=restarts, seed=seed,
                                  psi12_variant=psi12_variant, warm_starts=warm)
        if outcome.feasible:
            lo = mid
            best = outcome.certificate
            warm = {i: m.variables.to_vector() for i, m in enumerate(best.modes)}
        else:
            hi = mid
    return MaxAlphaResult(alpha=lo, certificate=best)


@dataclass(frozen=True, eq=False)
class LkReport:
    """Numerical check of the certified functional decay over one interval."""

    ok: bool
    decay_ok: bool
    jump_ok: bool
    worst_time: float
    worst_excess: float
    v_start: float


def lk_check(gains: Gains, variant: Coupling, lam: float, tau_bar: float, alpha: float,
             variables: LmiVariables, times, states, tol_factor: float = 1e-6) -> LkReport:
    """Evaluate the interval functional along a densely sampled mode trajectory
    and verify V(t) <= V(0) exp(-2 alpha t) + tol_factor V(0).

    ``times`` are offsets from the sampling instant (first entry 0, last entry
    the interval length <= tau_bar); ``states`` the matching mode states, whose
    first row is both the initial state and the held input.  Also checks that
    the difference and history terms vanish at the next sampling instant, so
    the functional cannot jump upward there.
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    if times.ndim != 1 or times.size < 2 or states.shape != (times.size, 2):
        raise ValueError("need matching dense times (m,) and states (m, 2)")
    if times[0] != 0.0 or np.any(np.diff(times) <= 0.0):
        raise ValueError("times must increase strictly from 0")
    length = float(times[-1])
    if length > tau_bar * (1.0 + 1e-12):
        raise ValueError(f"interval length {length} exceeds tau_bar {tau_bar}")

    a = gains.state_matrix()
    b = variant.input_matrix(gains)
    p, s, r = variables.P, variables.S, variables.R
    y0 = states[0]

    derivs = states @ a.T + lam * (b @ y0)[None, :]
    integrand = np.einsum("ij,jk,ik->i", derivs, r, derivs)
    hist = np.concatenate((
        [0.0],
        np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times)),
    ))
    xi = states - y0[None, :]
    v_state = np.einsum("ij,jk,ik->i", states, p, states)
    v_diff = np.einsum("ij,jk,ik->i", xi, s, xi)
    remaining = tau_bar - times
    v = v_state + remaining * (v_diff + hist)

    v0 = float(v[0])
    bound = v0 * np.exp(-2.0 * alpha * times) + tol_factor * v0
    excess = v - bound
    worst = int(np.argmax(excess))
    decay_ok = bool(excess[worst] <= 0.0)

    # restarting at the interval end drops the (nonnegative) second and third
    # terms, so the functional cannot increase across the sample instant
    v_restart = float(states[-1] @ p @ states[-1])
    jump_ok = bool(v_restart <= float(v[-1]) + tol_factor * max(v0, 1e-300))

    return LkReport(ok=decay_ok and jump_ok, decay_ok=decay_ok, jump_ok=jump_ok,
                    worst_time=float(times[worst]), worst_excess=float(excess[worst]),
                    v_start=v0)
