"""Command-line front end: config parsing, experiment orchestration, CSV/JSON output.

Commands: spectrum, simulate, certify, max-alpha, beta-table, reproduce-paper.
Exit codes: 0 success/feasible, 1 invalid input, 2 certificate not found.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import (
    Coupling,
    Gains,
    disagreement,
    sample_schedule,
    schedule_to_csv,
    simulate,
    trajectory_to_csv,
)
from .errors import ConvergenceError
from .graph import Topology, build_topology, parse_edge_list, spectrum
from .lmi import (
    ConsensusCertificate,
    certify_network,
    max_alpha,
    topology_digest,
    verify_mode_certificate,
)
from .uem import beta, consensus_value, mu

# the bundled 6-agent reference experiment (k_p=1, k_d=2, tau_bar=1)
REFERENCE_N = 6
REFERENCE_EDGES = ((1, 2), (1, 4), (2, 4), (3, 4), (3, 6), (4, 5), (5, 6))
REFERENCE_GAINS = Gains(k_p=1.0, k_d=2.0)
REFERENCE_TAU_BAR = 1.0
REFERENCE_ALPHA_CLAIM = 0.38


def reference_topology() -> Topology:
    return build_topology(REFERENCE_N, REFERENCE_EDGES)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    topology: Topology
    gains: Gains
    variant: Coupling
    tau_bar: float
    tau_min: float
    alpha: float | None
    horizon: float | None
    grid_step: float
    seed: int
    x0: np.ndarray
    v0: np.ndarray


def _cfg_error(field: str, message: str):
    raise ValueError(f"config field '{field}': {message}")


def _get_number(cfg: dict, field: str, *, required=False, default=None, positive=False):
    if field not in cfg:
        if required:
            _cfg_error(field, "is required")
        return default
    value = cfg[field]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _cfg_error(field, f"must be a number, got {value!r}")
    value = float(value)
    if positive and not value > 0.0:
        _cfg_error(field, f"must be > 0, got {value}")
    return value


def _parse_graph(cfg: dict, base_dir: Path) -> Topology:
    if "graph" not in cfg:
        _cfg_error("graph", "is required")
    spec = cfg["graph"]
    if not isinstance(spec, dict):
        _cfg_error("graph", "must be an object with 'edges' or 'file'")
    if "file" in spec:
        path = Path(spec["file"])
        if not path.is_absolute():
            path = base_dir / path
        try:
            edges = parse_edge_list(path.read_text())
        except OSError as exc:
            _cfg_error("graph.file", f"cannot read {path}: {exc}")
        except ValueError as exc:
            _cfg_error("graph.file", str(exc))
        n = spec.get("n", max(max(e) for e in edges) if edges else 0)
    elif "edges" in spec:
        edges = spec["edges"]
        if not isinstance(edges, list):
            _cfg_error("graph.edges", "must be a list of [i, j] pairs")
        edges = [tuple(e) for e in edges]
        n = spec.get("n", max(max(e) for e in edges) if edges else 0)
    else:
        _cfg_error("graph", "needs 'edges' (inline) or 'file' (edge-list path)")
    if not isinstance(n, int):
        _cfg_error("graph.n", f"must be an integer, got {n!r}")
    try:
        return build_topology(n, edges)
    except ValueError as exc:
        _cfg_error("graph", str(exc))


def _resolve_initial_state(cfg: dict, n: int, seed: int):
    spec = cfg.get("initial_state", {"generator": "paper_default"})
    if not isinstance(spec, dict):
        _cfg_error("initial_state", "must be an object")
    if "x0" in spec or "v0" in spec:
        for key in ("x0", "v0"):
            if key not in spec:
                _cfg_error(f"initial_state.{key}", "is required when the other is given")
        x0 = np.asarray(spec["x0"], dtype=float)
        v0 = np.asarray(spec["v0"], dtype=float)
        if x0.shape != (n,) or v0.shape != (n,):
            _cfg_error("initial_state", f"x0/v0 must have length {n}")
        return x0, v0
    generator = spec.get("generator")
    if generator == "paper_default":
        x_range, v_range = (-5.0, 5.0), (-1.0, 1.0)
    elif generator == "random_uniform":
        x_range = tuple(spec.get("x_range", (-5.0, 5.0)))
        v_range = tuple(spec.get("v_range", (-1.0, 1.0)))
        if len(x_range) != 2 or len(v_range) != 2:
            _cfg_error("initial_state", "x_range/v_range must be [low, high]")
    else:
        _cfg_error("initial_state.generator",
                   f"must be 'random_uniform' or 'paper_default', got {generator!r}")
    rng = np.random.default_rng([seed, 1])  # distinct stream from the schedule
    x0 = rng.uniform(x_range[0], x_range[1], size=n)
    v0 = rng.uniform(v_range[0], v_range[1], size=n)
    return x0, v0


def load_config(path, overrides=None) -> ExperimentConfig:
    """Read and validate a JSON experiment config; overrides win over file values."""
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValueError("config must be a JSON object")
    if overrides:
        cfg = {**cfg, **{k: v for k, v in overrides.items() if v is not None}}

    topology = _parse_graph(cfg, path.parent)
    k_p = _get_number(cfg, "k_p", required=True, positive=True)
    k_d = _get_number(cfg, "k_d", required=True, positive=True)
    gains = Gains(k_p=k_p, k_d=k_d)
    tau_bar = _get_number(cfg, "tau_bar", required=True, positive=True)
    tau_min = _get_number(cfg, "tau_min", default=tau_bar / 10.0, positive=True)
    if tau_min > tau_bar:
        _cfg_error("tau_min", f"must be <= tau_bar={tau_bar}, got {tau_min}")
    variant_name = cfg.get("variant", "full_pd")
    try:
        variant = Coupling(variant_name)
    except ValueError:
        _cfg_error("variant", f"must be one of {[c.value for c in Coupling]}, got {variant_name!r}")
    alpha = _get_number(cfg, "alpha", positive=True)
    horizon = _get_number(cfg, "horizon", positive=True)
    grid_step = _get_number(cfg, "grid_step", default=tau_bar / 20.0, positive=True)
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        _cfg_error("seed", f"must be an integer, got {seed!r}")
    x0, v0 = _resolve_initial_state(cfg, topology.n, seed)
    return ExperimentConfig(topology=topology, gains=gains, variant=variant,
                            tau_bar=tau_bar, tau_min=tau_min, alpha=alpha,
                            horizon=horizon, grid_step=grid_step, seed=seed,
                            x0=x0, v0=v0)


def _mat(a: np.ndarray):
    return [[float(x) for x in row] for row in np.asarray(a)]


def certificate_payload(cert: ConsensusCertificate) -> dict:
    modes = []
    for m in cert.modes:
        modes.append({
            "lambda": m.lam,
            "alpha": m.alpha,
            "multiplicity": m.multiplicity,
            "P": _mat(m.variables.P),
            "S": _mat(m.variables.S),
            "R": _mat(m.variables.R),
            "Q1": _mat(m.variables.Q1),
            "Q2": _mat(m.variables.Q2),
            "margins": [float(x) for x in m.margins],
            "solver_iterations": m.iterations,
        })
    return {
        "alpha": cert.alpha,
        "tau_bar": cert.tau_bar,
        "variant": cert.variant.value,
        "gains": {"k_p": cert.gains.k_p, "k_d": cert.gains.k_d},
        "topology": {"digest": cert.topology_digest},
        "eigenvalues": [float(x) for x in cert.eigenvalues],
        "modes": modes,
    }


def _reverify(cert: ConsensusCertificate, psi12_variant: str) -> None:
    for m in cert.modes:
        margins = verify_mode_certificate(cert.gains, cert.variant, cert.tau_bar, m,
                                          psi12_variant)
        if float(margins.max()) > -1e-6:
            raise ConvergenceError(
                f"certificate for lambda={m.lam} failed the independent margin "
                f"re-check (worst {margins.max():.3e})"
            )


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def cmd_spectrum(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed})
    spec = spectrum(cfg.topology)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "spectrum.json", {
        "n": cfg.topology.n,
        "digest": topology_digest(cfg.topology),
        "eigenvalues": [float(x) for x in spec.eigenvalues],
    })
    print("eigenvalues:", " ".join(f"{x:.12g}" for x in spec.eigenvalues))
    return 0


def _run_simulation(cfg: ExperimentConfig, out: Path, suffix: str = "") -> dict:
    if cfg.horizon is None:
        _cfg_error("horizon", "is required for simulation")
    schedule = sample_schedule(cfg.seed, cfg.tau_min, cfg.tau_bar, cfg.horizon)
    traj = simulate(cfg.topology, cfg.gains, cfg.variant, schedule,
                    cfg.x0, cfg.v0, cfg.grid_step, cfg.horizon)
    dis = disagreement(traj)
    trajectory_to_csv(traj, out / f"trajectory{suffix}.csv")
    schedule_to_csv(schedule, out / f"schedule{suffix}.csv", horizon=cfg.horizon)
    _write_csv(out / f"disagreement{suffix}.csv", "t,disagreement",
               ([f"{t:.17g}", f"{d:.17g}"] for t, d in zip(traj.times, dis)))
    sampled = traj.is_sample
    n = cfg.topology.n
    header = "t," + ",".join(f"x{i+1}" for i in range(n)) \
        + "," + ",".join(f"v{i+1}" for i in range(n))
    _write_csv(out / f"samples{suffix}.csv", header,
               ([f"{traj.times[i]:.17g}"]
                + [f"{val:.17g}" for val in traj.xs[i]]
                + [f"{val:.17g}" for val in traj.vs[i]]
                for i in np.nonzero(sampled)[0]))
    return {"trajectory": traj, "schedule": schedule, "disagreement": dis}


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = _run_simulation(cfg, out)
    final = result["trajectory"].xs[-1]
    print(f"simulated to t={result['trajectory'].times[-1]:g}; "
          f"final spread {final.max() - final.min():.3e}")
    return 0


def cmd_certify(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed, "alpha": args.alpha})
    if cfg.alpha is None:
        _cfg_error("alpha", "is required for certify (config value or --alpha)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outcome = certify_network(cfg.topology, cfg.gains, cfg.variant, cfg.tau_bar,
                              cfg.alpha, budget=args.solver_budget,
                              restarts=args.solver_restarts, seed=args.solver_seed,
                              psi12_variant=args.psi12_variant)
    if not outcome.feasible:
        print(f"not found: no certificate at alpha={cfg.alpha} "
              f"(failed at lambda={outcome.failed_lambda:.12g})", file=sys.stderr)
        return 2
    cert = outcome.certificate
    _reverify(cert, args.psi12_variant)
    _write_json(out / "certificate.json", certificate_payload(cert))
    print(f"feasible: alpha={cfg.alpha} certified for "
          f"{len(cert.eigenvalues)} modes ({len(cert.modes)} distinct)")
    return 0


def cmd_max_alpha(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = max_alpha(cfg.topology, cfg.gains, cfg.variant, cfg.tau_bar,
                       tolerance=args.tolerance, budget=args.solver_budget,
                       restarts=args.solver_restarts, seed=args.solver_seed,
                       psi12_variant=args.psi12_variant)
    if not result.found:
        print("not found: no certificate even at the lower bracket", file=sys.stderr)
        return 2
    _reverify(result.certificate, args.psi12_variant)
    _write_json(out / "max_alpha.json", {
        "alpha": result.alpha,
        "certificate": certificate_payload(result.certificate),
    })
    print(f"max certified alpha: {result.alpha:.6g}")
    return 0


def cmd_beta_table(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    step = cfg.grid_step
    count = int(round(cfg.tau_bar / step))
    ts = [step * (i + 1) for i in range(count)]
    _write_csv(out / "beta_table.csv", "T,beta,mu",
               ([f"{t:.17g}", f"{beta(cfg.gains, t):.17g}", f"{mu(cfg.gains, t):.17g}"]
                for t in ts))
    print(f"wrote beta table with {count} rows (T up to {ts[-1]:g})")
    return 0


def cmd_reproduce(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    topology = reference_topology()
    gains = REFERENCE_GAINS
    tau_bar = REFERENCE_TAU_BAR
    seed = args.seed if args.seed is not None else 0
    horizon, grid_step = 30.0, tau_bar / 20.0
    rng = np.random.default_rng([seed, 1])
    x0 = rng.uniform(-5.0, 5.0, size=topology.n)
    v0 = rng.uniform(-1.0, 1.0, size=topology.n)

    summary = {
        "seed": seed,
        "claimed_alpha_full_pd": REFERENCE_ALPHA_CLAIM,
        "claimed_alpha_position_only": 0.21,
    }
    exit_code = 0
    for variant, tag in ((Coupling.FULL_PD, "full_pd"),
                         (Coupling.POSITION_ONLY, "position_only")):
        cfg = ExperimentConfig(topology=topology, gains=gains, variant=variant,
                               tau_bar=tau_bar, tau_min=tau_bar / 10.0, alpha=None,
                               horizon=horizon, grid_step=grid_step, seed=seed,
                               x0=x0, v0=v0)
        result = _run_simulation(cfg, out, suffix=f"_{tag}")
        final = result["trajectory"].xs[-1]
        summary[f"final_positions_{tag}"] = [float(x) for x in final]
        summary[f"final_spread_{tag}"] = float(final.max() - final.min())

        search = max_alpha(topology, gains, variant, tau_bar,
                           tolerance=args.tolerance, budget=args.solver_budget,
                           restarts=args.solver_restarts, seed=args.solver_seed,
                           psi12_variant=args.psi12_variant)
        if search.found:
            _reverify(search.certificate, args.psi12_variant)
            _write_json(out / f"certificate_{tag}.json",
                        certificate_payload(search.certificate))
            summary[f"max_alpha_{tag}"] = search.alpha
        else:
            summary[f"max_alpha_{tag}"] = None
            exit_code = 2

    # the consensus value predicted from the unit mode (full-PD protocol)
    spec = spectrum(topology)
    schedule = sample_schedule(seed, tau_bar / 10.0, tau_bar, horizon)
    z0 = float((spec.modal_inverse @ x0)[0])
    zd0 = float((spec.modal_inverse @ v0)[0])
    summary["gamma_predicted_full_pd"] = consensus_value(gains, schedule, z0, zd0, 1e-10)

    claim = certify_network(topology, gains, Coupling.FULL_PD, tau_bar,
                            REFERENCE_ALPHA_CLAIM, budget=args.solver_budget,
                            restarts=args.solver_restarts, seed=args.solver_seed,
                            psi12_variant=args.psi12_variant)
    summary["claimed_alpha_full_pd_feasible"] = bool(claim.feasible)

    _write_json(out / "summary.json", summary)
    print(f"max alpha: full_pd={summary['max_alpha_full_pd']}, "
          f"position_only={summary['max_alpha_position_only']}")
    print(f"claimed alpha {REFERENCE_ALPHA_CLAIM} feasible: "
          f"{summary['claimed_alpha_full_pd_feasible']}")
    return exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdconsensus",
        description="Sampled-data PD consensus: simulation and decay-rate certification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")

    def add_solver(p):
        p.add_argument("--alpha", type=float, default=None, help="override config alpha")
        p.add_argument("--solver-budget", type=int, default=200_000)
        p.add_argument("--solver-restarts", type=int, default=8)
        p.add_argument("--solver-seed", type=int, default=0)
        p.add_argument("--psi12-variant", choices=["lemma", "derivation"],
                       default="lemma")
        p.add_argument("--tolerance", type=float, default=1e-3,
                       help="bisection tolerance for the decay-rate search")

    p = sub.add_parser("spectrum", help="eigenvalues of the neighbor-averaging matrix")
    add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("simulate", help="simulate and export trajectory CSVs")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="certify a decay rate for all modes")
    add_common(p)
    add_solver(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("max-alpha", help="largest certifiable decay rate")
    add_common(p)
    add_solver(p)
    p.set_defaults(func=cmd_max_alpha)

    p = sub.add_parser("beta-table", help="tabulate the unit-mode interval factors")
    add_common(p)
    p.set_defaults(func=cmd_beta_table)

    p = sub.add_parser("reproduce-paper",
                       help="run the bundled 6-agent benchmark (both variants)")
    add_common(p, needs_config=False)
    add_solver(p)
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
