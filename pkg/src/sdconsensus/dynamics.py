"""Sampled-data PD consensus dynamics.

Between communication instants each agent integrates its own continuous PD
feedback while the neighbor information is held at the last sample, so the
network evolves exactly by closed-form linear maps on every inter-sample
interval:

    d/dt [x; v] = (A kron I) [x; v] + (B kron W) [x(t_k); v(t_k)]

with A = [[0, 1], [-k_p, -k_d]] and B = [[0, 0], [k_p, k_d]] (or the
position-only variant [[0, 0], [k_p, 0]]).  ``simulate`` propagates the stacked
2n-state directly through the Kronecker structure; ``simulate_modal``
decouples it through the eigenbasis of W and propagates scalar modes, which
gives an independent cross-check of the same trajectory.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .graph import is_connected, spectrum, weighted_adjacency

ZERO_DISCRIMINANT_BAND = 1e-9


@dataclass(frozen=True)
class Gains:
    """Proportional/derivative gains of the consensus protocol, both > 0."""

    k_p: float
    k_d: float

    def __post_init__(self):
        if not (self.k_p > 0.0 and self.k_d > 0.0):
            raise ValueError(f"gains must be positive, got k_p={self.k_p}, k_d={self.k_d}")

    @property
    def sigma(self) -> float:
        """Discriminant k_d^2/4 - k_p of the per-agent characteristic polynomial."""
        return self.k_d * self.k_d / 4.0 - self.k_p

    @property
    def discriminant_class(self) -> str:
        band = ZERO_DISCRIMINANT_BAND * max(1.0, self.k_d * self.k_d)
        s = self.sigma
        if abs(s) < band:
            return "zero"
        return "positive" if s > 0.0 else "negative"

    def state_matrix(self) -> np.ndarray:
        return np.array([[0.0, 1.0], [-self.k_p, -self.k_d]])

    def state_matrix_inverse(self) -> np.ndarray:
        # det A = k_p > 0, so A is always invertible
        return np.array([[-self.k_d / self.k_p, -1.0 / self.k_p], [1.0, 0.0]])


class Coupling(enum.Enum):
    """Which sampled neighbor information enters the feedback."""

    FULL_PD = "full_pd"
    POSITION_ONLY = "position_only"

    def input_matrix(self, gains: Gains) -> np.ndarray:
        if self is Coupling.FULL_PD:
            return np.array([[0.0, 0.0], [gains.k_p, gains.k_d]])
        return np.array([[0.0, 0.0], [gains.k_p, 0.0]])


@dataclass(frozen=True, eq=False)
class SamplingSchedule:
    """Strictly increasing sampling instants starting at 0 with gaps in (0, tau_bar].

    ``seed`` records the generator used by :func:`sample_schedule`, which lets
    downstream consumers extend the gap sequence deterministically past the
    stored horizon; explicitly constructed schedules carry ``seed=None``.
    """

    instants: np.ndarray
    tau_min: float
    tau_bar: float
    seed: int | None = None

    def __post_init__(self):
        instants = np.array(self.instants, dtype=float)
        if instants.ndim != 1 or instants.size < 2:
            raise ValueError("schedule needs at least two instants")
        if instants[0] != 0.0:
            raise ValueError(f"schedule must start at t=0, got {instants[0]}")
        gaps = np.diff(instants)
        if np.any(gaps <= 0.0):
            raise ValueError("sampling instants must be strictly increasing")
        if not (0.0 < self.tau_min <= self.tau_bar):
            raise ValueError(
                f"need 0 < tau_min <= tau_bar, got tau_min={self.tau_min}, tau_bar={self.tau_bar}"
            )
        if np.any(gaps > self.tau_bar * (1.0 + 1e-12)):
            raise ValueError(f"a sampling gap exceeds tau_bar={self.tau_bar}")
        object.__setattr__(self, "instants", instants)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.instants)

    def gap_stream(self):
        """Yield the inter-sample gaps, extending past the stored horizon when
        the schedule was generated from a seed (same draw sequence, continued)."""
        if self.seed is None:
            yield from self.gaps
            return
        rng = np.random.default_rng(self.seed)
        count = self.instants.size - 1
        for _ in range(count):
            yield float(rng.uniform(self.tau_min, self.tau_bar))
        while True:
            yield float(rng.uniform(self.tau_min, self.tau_bar))


def sample_schedule(seed: int, tau_min: float, tau_bar: float, horizon: float) -> SamplingSchedule:
    """Draw sampling instants with gaps uniform on [tau_min, tau_bar] until the
    horizon is covered.  Identical seed gives an identical schedule."""
    if not (0.0 < tau_min <= tau_bar):
        raise ValueError(f"need 0 < tau_min <= tau_bar, got tau_min={tau_min}, tau_bar={tau_bar}")
    if not horizon > 0.0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    rng = np.random.default_rng(seed)
    instants = [0.0]
    while instants[-1] < horizon:
        instants.append(instants[-1] + float(rng.uniform(tau_min, tau_bar)))
    return SamplingSchedule(
        instants=np.array(instants), tau_min=tau_min, tau_bar=tau_bar, seed=int(seed)
    )


def _damped_basis(gains: Gains, dt: float):
    """Stable evaluation of c0 = exp(-nu t) cosh(om t) and c1 = exp(-nu t) sinh(om t)/om
    across the three discriminant cases (trig forms for sigma < 0, polynomial
    limit in the zero band)."""
    nu = gains.k_d / 2.0
    cls = gains.discriminant_class
    if cls == "zero":
        e = math.exp(-nu * dt)
        return e * 1.0, e * dt
    if cls == "negative":
        om = math.sqrt(-gains.sigma)
        e = math.exp(-nu * dt)
        return e * math.cos(om * dt), e * math.sin(om * dt) / om
    om = math.sqrt(gains.sigma)
    if om * dt < 500.0:
        e = math.exp(-nu * dt)
        return e * math.cosh(om * dt), e * math.sinh(om * dt) / om
    # huge exponents: fall back to difference form, exponents are <= 0
    ep = math.exp((om - nu) * dt)
    em = math.exp(-(om + nu) * dt)
    return 0.5 * (ep + em), (ep - em) / (2.0 * om)


def expm2(gains: Gains, dt: float) -> np.ndarray:
    """Closed-form matrix exponential exp(A dt) of the PD state matrix.

    Continuous across the discriminant sign change; dt >= 0.
    """
    if dt < 0.0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    c0, c1 = _damped_basis(gains, dt)
    nu = gains.k_d / 2.0
    # exp(A t) = c0 I + c1 (A + nu I)
    return np.array([
        [c0 + nu * c1, c1],
        [-gains.k_p * c1, c0 - nu * c1],
    ])


def step_matrix(gains: Gains, variant: Coupling, lam: float, dt: float) -> np.ndarray:
    """Exact one-interval map of a decoupled mode with held input.

    Solves d/dt y = A y + lam B y(0) over [0, dt]:
    M = exp(A dt) + inv(A) (exp(A dt) - I) lam B.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    e = expm2(gains, dt)
    g = gains.state_matrix_inverse() @ (e - np.eye(2))
    return e + g @ (lam * variant.input_matrix(gains))


@dataclass(frozen=True, eq=False)
class NetworkState:
    t: float
    x: np.ndarray
    v: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Network states on the union of the output grid and the sampling instants."""

    times: np.ndarray     # (m,)
    xs: np.ndarray        # (m, n)
    vs: np.ndarray        # (m, n)
    is_sample: np.ndarray  # (m,) bool
    schedule: SamplingSchedule
    gains: Gains
    variant: Coupling

    def states(self):
        for i, t in enumerate(self.times):
            yield NetworkState(t=float(t), x=self.xs[i].copy(), v=self.vs[i].copy())


def _output_times(schedule: SamplingSchedule, grid_step: float, horizon: float):
    """Merge the uniform output grid with the sampling instants inside the horizon.

    Grid points that collide with a sampling instant (within 1e-9 relative)
    are dropped in favor of the instant.
    """
    n_steps = int(math.floor(horizon / grid_step + 1e-9))
    grid = np.arange(n_steps + 1) * grid_step
    if grid[-1] < horizon - 1e-12 * max(1.0, horizon):
        grid = np.append(grid, horizon)
    samples = schedule.instants[schedule.instants <= horizon + 1e-12 * max(1.0, horizon)]
    entries = [(float(t), True) for t in samples]
    for t in grid:
        if np.min(np.abs(samples - t)) > 1e-9 * max(1.0, t):
            entries.append((float(t), False))
    entries.sort(key=lambda e: e[0])
    times = np.array([e[0] for e in entries])
    flags = np.array([e[1] for e in entries], dtype=bool)
    return times, flags


def _check_simulation_inputs(topology, schedule, x0, v0, grid_step, horizon):
    if not is_connected(topology):
        raise ValueError("simulation requires a connected topology")
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if x0.shape != (topology.n,) or v0.shape != (topology.n,):
        raise ValueError(
            f"initial state dimension mismatch: expected ({topology.n},), "
            f"got x0 {x0.shape}, v0 {v0.shape}"
        )
    if not grid_step > 0.0:
        raise ValueError(f"grid_step must be > 0, got {grid_step}")
    if not horizon > 0.0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    if schedule.instants[-1] < horizon - 1e-12 * max(1.0, horizon):
        raise ValueError(
            f"schedule ends at {schedule.instants[-1]}, before the horizon {horizon}"
        )
    return x0, v0


def _interval_pieces(gains: Gains, b_matrix: np.ndarray, dt: float):
    """(exp(A dt), inv(A)(exp(A dt) - I) B) for one offset inside an interval."""
    e = expm2(gains, dt)
    k = gains.state_matrix_inverse() @ (e - np.eye(2)) @ b_matrix
    return e, k


def simulate(topology, gains, variant, schedule, x0, v0, grid_step, horizon) -> Trajectory:
    """Exact interval-by-interval propagation of the full sampled network.

    Uses the Kronecker structure of the stacked 2n-dimensional system (no
    eigendecomposition), refreshing the held sample at every instant.
    """
    x0, v0 = _check_simulation_inputs(topology, schedule, x0, v0, grid_step, horizon)
    w = weighted_adjacency(topology)
    b_matrix = variant.input_matrix(gains)
    times, flags = _output_times(schedule, grid_step, horizon)

    xs = np.empty((times.size, topology.n))
    vs = np.empty((times.size, topology.n))
    x_k, v_k = x0.copy(), v0.copy()
    instants = schedule.instants
    out = 0
    for k in range(instants.size - 1):
        t_k, t_next = instants[k], instants[k + 1]
        if t_k > horizon * (1.0 + 1e-12):
            break
        wx, wv = w @ x_k, w @ v_k
        while out < times.size and times[out] < t_next:
            d = float(times[out] - t_k)
            if d == 0.0:
                xs[out], vs[out] = x_k, v_k
            else:
                e, km = _interval_pieces(gains, b_matrix, d)
                xs[out] = e[0, 0] * x_k + e[0, 1] * v_k + km[0, 0] * wx + km[0, 1] * wv
                vs[out] = e[1, 0] * x_k + e[1, 1] * v_k + km[1, 0] * wx + km[1, 1] * wv
            out += 1
        if out >= times.size:
            break
        e, km = _interval_pieces(gains, b_matrix, float(t_next - t_k))
        x_k, v_k = (
            e[0, 0] * x_k + e[0, 1] * v_k + km[0, 0] * wx + km[0, 1] * wv,
            e[1, 0] * x_k + e[1, 1] * v_k + km[1, 0] * wx + km[1, 1] * wv,
        )
    if out < times.size:
        # only the final instant itself can remain (t == last instant <= horizon)
        xs[out:], vs[out:] = x_k, v_k
    return Trajectory(times=times, xs=xs, vs=vs, is_sample=flags,
                      schedule=schedule, gains=gains, variant=variant)


def simulate_modal(topology, gains, variant, schedule, x0, v0, grid_step, horizon) -> Trajectory:
    """Same trajectory as :func:`simulate`, through the eigenbasis of the
    neighbor-averaging matrix: decoupled scalar modes, each propagated by its
    own closed-form one-interval map."""
    x0, v0 = _check_simulation_inputs(topology, schedule, x0, v0, grid_step, horizon)
    spec = spectrum(topology)
    lams = spec.eigenvalues
    t_inv = spec.modal_inverse
    t_mat = spec.modal_matrix
    b_matrix = variant.input_matrix(gains)
    times, flags = _output_times(schedule, grid_step, horizon)

    z_k = t_inv @ x0
    zd_k = t_inv @ v0
    zs = np.empty((times.size, topology.n))
    zds = np.empty((times.size, topology.n))
    instants = schedule.instants
    out = 0
    for k in range(instants.size - 1):
        t_k, t_next = instants[k], instants[k + 1]
        if t_k > horizon * (1.0 + 1e-12):
            break
        lz, lzd = lams * z_k, lams * zd_k
        while out < times.size and times[out] < t_next:
            d = float(times[out] - t_k)
            if d == 0.0:
                zs[out], zds[out] = z_k, zd_k
            else:
                e, km = _interval_pieces(gains, b_matrix, d)
                zs[out] = e[0, 0] * z_k + e[0, 1] * zd_k + km[0, 0] * lz + km[0, 1] * lzd
                zds[out] = e[1, 0] * z_k + e[1, 1] * zd_k + km[1, 0] * lz + km[1, 1] * lzd
            out += 1
        if out >= times.size:
            break
        e, km = _interval_pieces(gains, b_matrix, float(t_next - t_k))
        z_k, zd_k = (
            e[0, 0] * z_k + e[0, 1] * zd_k + km[0, 0] * lz + km[0, 1] * lzd,
            e[1, 0] * z_k + e[1, 1] * zd_k + km[1, 0] * lz + km[1, 1] * lzd,
        )
    if out < times.size:
        zs[out:], zds[out:] = z_k, zd_k
    return Trajectory(times=times, xs=zs @ t_mat.T, vs=zds @ t_mat.T, is_sample=flags,
                      schedule=schedule, gains=gains, variant=variant)


def mode_interval(gains, variant, lam, y0, length, num=201):
    """Dense trajectory of one decoupled mode over a single interval [0, length]
    starting from the sampled state y0 (which is also the held input)."""
    if not length > 0.0:
        raise ValueError(f"interval length must be > 0, got {length}")
    y0 = np.asarray(y0, dtype=float)
    times = np.linspace(0.0, float(length), int(num))
    states = np.empty((times.size, 2))
    states[0] = y0
    for i in range(1, times.size):
        states[i] = step_matrix(gains, variant, lam, float(times[i])) @ y0
    return times, states


def _mean_removed(block: np.ndarray) -> np.ndarray:
    # shift by the first agent before averaging: exact zero for identical rows
    shifted = block - block[:, :1]
    return shifted - shifted.mean(axis=1, keepdims=True)


def disagreement(trajectory: Trajectory) -> np.ndarray:
    """Per time point, the Euclidean norm of the mean-removed stacked state."""
    if trajectory.times.size == 0:
        raise ValueError("trajectory is empty")
    dx = _mean_removed(trajectory.xs)
    dv = _mean_removed(trajectory.vs)
    return np.sqrt((dx * dx).sum(axis=1) + (dv * dv).sum(axis=1))


def trajectory_to_csv(trajectory: Trajectory, path) -> None:
    """Write `t, x1..xn, v1..vn, is_sample` rows with 17 significant digits."""
    n = trajectory.xs.shape[1]
    header = "t," + ",".join(f"x{i + 1}" for i in range(n)) \
        + "," + ",".join(f"v{i + 1}" for i in range(n)) + ",is_sample"
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for i, t in enumerate(trajectory.times):
            row = [f"{t:.17g}"]
            row += [f"{val:.17g}" for val in trajectory.xs[i]]
            row += [f"{val:.17g}" for val in trajectory.vs[i]]
            row.append("1" if trajectory.is_sample[i] else "0")
            fh.write(",".join(row) + "\n")


def schedule_to_csv(schedule: SamplingSchedule, path, horizon=None) -> None:
    """Write `k, t_k` rows (optionally truncated at a horizon)."""
    instants = schedule.instants
    if horizon is not None:
        instants = instants[instants <= horizon + 1e-12 * max(1.0, horizon)]
    with open(path, "w", newline="\n") as fh:
        fh.write("k,t_k\n")
        for k, t in enumerate(instants):
            fh.write(f"{k},{t:.17g}\n")
