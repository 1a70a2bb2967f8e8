"""Second-order multi-agent consensus under aperiodic sampled-data exchange.

Exact piecewise simulation of the PD protocol, closed-form analysis of the
consensus-carrying mode, and decay-rate certification through linear matrix
inequalities solved by a small built-in feasibility engine.
"""
from .dynamics import (
    Coupling,
    Gains,
    NetworkState,
    SamplingSchedule,
    Trajectory,
    disagreement,
    expm2,
    mode_interval,
    sample_schedule,
    schedule_to_csv,
    simulate,
    simulate_modal,
    step_matrix,
    trajectory_to_csv,
)
from .errors import ConvergenceError
from .graph import (
    Spectrum,
    Topology,
    build_topology,
    is_connected,
    parse_edge_list,
    spectrum,
    weighted_adjacency,
)
from .lmi import (
    ConsensusCertificate,
    LkReport,
    LmiVariables,
    MaxAlphaResult,
    ModeCertificate,
    NetworkCertification,
    build_constraints,
    certify_mode,
    certify_network,
    lk_check,
    lmi_matrices,
    max_alpha,
    psi_blocks,
    topology_digest,
    verify_mode_certificate,
)
from .sdpcore import (
    EPS_MARGIN,
    AffineMatrixConstraint,
    FeasibilityResult,
    feasibility,
    jacobi_eigh,
    max_eig_sym,
)
from .uem import (
    UemProduct,
    UemStep,
    beta,
    consensus_value,
    mu,
    mu_bound,
    step,
    uem_product,
)

__version__ = "0.1.0"

__all__ = [
    "AffineMatrixConstraint",
    "ConsensusCertificate",
    "ConvergenceError",
    "Coupling",
    "EPS_MARGIN",
    "FeasibilityResult",
    "Gains",
    "LkReport",
    "LmiVariables",
    "MaxAlphaResult",
    "ModeCertificate",
    "NetworkCertification",
    "NetworkState",
    "SamplingSchedule",
    "Spectrum",
    "Topology",
    "Trajectory",
    "UemProduct",
    "UemStep",
    "beta",
    "build_constraints",
    "build_topology",
    "certify_mode",
    "certify_network",
    "consensus_value",
    "disagreement",
    "expm2",
    "feasibility",
    "is_connected",
    "jacobi_eigh",
    "lk_check",
    "lmi_matrices",
    "max_alpha",
    "max_eig_sym",
    "mode_interval",
    "mu",
    "mu_bound",
    "parse_edge_list",
    "psi_blocks",
    "sample_schedule",
    "schedule_to_csv",
    "simulate",
    "simulate_modal",
    "spectrum",
    "step",
    "step_matrix",
    "topology_digest",
    "trajectory_to_csv",
    "uem_product",
    "verify_mode_certificate",
    "weighted_adjacency",
]
