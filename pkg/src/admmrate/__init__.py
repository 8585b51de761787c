"""Distributed consensus ADMM: simulation and exact linear-rate analysis.

The package simulates ADMM for minimizing a sum of private convex costs
over overlapping agent clusters, computes the exact asymptotic linear
contraction factor of the consensus error from the spectral structure of
the driver recursion, and ships closed forms plus an experiment harness
to verify that theory and simulation agree.
"""

from .errors import (
    AdmmRateError,
    AssumptionViolatedError,
    ConfigError,
    InconsistentRateError,
    InvalidTopologyError,
    NoConvergenceError,
    NonConvexError,
    NotConnectedError,
    NotSymmetricError,
    SingularSystemError,
)
from .linalg import (
    block_diag,
    colspace_projector,
    kron,
    pinv,
    real_eig,
    sprad,
    sym_eig,
)
from .topology import (
    ComponentStructure,
    RggSample,
    ValidationReport,
    centralized,
    component_graph,
    from_edges,
    mixing_matrices,
    random_geometric_graph,
    ring,
    selection_matrix,
    structure_from_json,
    structure_to_json,
    validate,
)
from .objectives import (
    Exponential,
    ProblemInstance,
    Quadratic,
    ScalarSmooth,
    ScaledSquare,
    instance_from_json,
    instance_to_json,
    make_instance,
    oracle_from_json,
    oracle_to_json,
    prox,
    sample_experiment_objectives,
    solve_consensus_minimizer,
)
from .engine import (
    AdmmState,
    DistributedState,
    Trajectory,
    initial_state,
    run,
    state_from_json,
    state_invariant_residuals,
    state_to_json,
    step_distributed_edges,
    step_distributed_general,
    step_matrix_form,
    to_distributed,
)
from .rate import (
    RateReport,
    RingRateBreakdown,
    affine_offset,
    centralized_rate,
    convergence_rate,
    curvature_matrix,
    fixed_point,
    iteration_matrix,
    optimize_rho,
    primal_from_driver,
    rate_is_tight,
    rate_report,
    ring_optimal_rate,
    ring_optimal_rho,
    ring_rate,
    unit_eigenspace,
)
from .experiments import (
    EmpiricalRateEstimate,
    ExperimentConfig,
    fit_empirical_rate,
    run_experiment,
    sweep_rates,
)

__version__ = "0.1.0"
