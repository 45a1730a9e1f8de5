"""Consensus-coupled primal-dual gradient flow for networked linear SVMs.

A network of nodes, each holding a horizontal slice of a labeled dataset,
trains a common soft-margin linear classifier by following the projected
saddle-point flow of the coupled problem's Lagrangian. The package
integrates that flow, certifies its Lyapunov/passivity structure along the
trajectory, and checks the result against an exhaustive reference solver.
"""

from .data import Dataset, NodePartition, gen_synthetic, load_dataset, partition
from .diagnostics import (
    CertificateReport,
    MonotoneViolation,
    PassivityLedger,
    certificate,
    check_monotone,
    consensus_residual,
    passivity_ledger,
    storage_h1,
    storage_h2,
    storage_h3,
    total_lyapunov,
)
from .dynamics import (
    SwitchSignals,
    active_switch_sets,
    field_inf_norm,
    positive_projection,
    vector_field,
)
from .graph import Graph, build_graph, h1_gain_bound, lambda2, laplacian_apply, topology_edges
from .integrator import FlowConfig, StopReason, Trace, run_flow, step
from .oracle import CentralSolution, embed_consensus, solve_centralized
from .problem import (
    KktReport,
    NetworkState,
    Problem,
    build_problem,
    hinge_constraint,
    kkt_residuals,
    lagrangian_value,
    objective_value,
    zeros_state,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "NodePartition", "gen_synthetic", "load_dataset", "partition",
    "Graph", "build_graph", "topology_edges", "laplacian_apply", "lambda2",
    "h1_gain_bound",
    "Problem", "NetworkState", "KktReport", "build_problem", "zeros_state",
    "hinge_constraint", "lagrangian_value", "objective_value", "kkt_residuals",
    "SwitchSignals", "positive_projection", "vector_field",
    "active_switch_sets", "field_inf_norm",
    "FlowConfig", "StopReason", "Trace", "step", "run_flow",
    "storage_h1", "storage_h2", "storage_h3", "total_lyapunov",
    "consensus_residual", "check_monotone", "MonotoneViolation",
    "passivity_ledger", "PassivityLedger", "certificate", "CertificateReport",
    "CentralSolution", "solve_centralized", "embed_consensus",
    "__version__",
]
