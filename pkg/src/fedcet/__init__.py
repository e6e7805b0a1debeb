"""fedcet: federated optimization that stays exact under heterogeneous
client data while exchanging one vector per round, plus the deterministic
simulation and verification tooling around it."""

__version__ = "0.1.0"

from .algorithms import (
    FedCetClientState,
    HyperParams,
    ScaffoldState,
    fedavg_fixed_point,
    fedavg_round,
    fedcet_comm_round,
    fedcet_init,
    fedcet_local_step,
    fedcet_run,
    scaffold_init,
    scaffold_round,
)
from .data import gen_data, problem_digest, vector_digest
from .dynamics import (
    FixedPoint,
    LyapunovSample,
    StackedState,
    convergence_error,
    fixed_point_residual,
    initial_stacked_state,
    lyapunov,
    oracle_round,
    oracle_step,
)
from .harness import RoundRecord, RunResult, StopRule, compare, run_algorithm
from .linalg import WeightSpec, center_project, frob_inner, weighted_norm_sq
from .losses import (
    CallableLoss,
    ClientLoss,
    FederatedProblem,
    QuadraticRisk,
    finite_difference_gradient,
    minimize_by_gradient_descent,
)
from .lr_search import (
    RateReport,
    SearchConfig,
    c_max,
    condition_c1,
    condition_c2,
    contraction_margins,
    initial_bound,
    rho1,
    rho2,
    search,
    search_with_fraction,
)

__all__ = [
    "CallableLoss",
    "ClientLoss",
    "FederatedProblem",
    "FedCetClientState",
    "FixedPoint",
    "HyperParams",
    "LyapunovSample",
    "QuadraticRisk",
    "RateReport",
    "RoundRecord",
    "RunResult",
    "ScaffoldState",
    "SearchConfig",
    "StackedState",
    "StopRule",
    "WeightSpec",
    "c_max",
    "center_project",
    "compare",
    "condition_c1",
    "condition_c2",
    "contraction_margins",
    "convergence_error",
    "fedavg_fixed_point",
    "fedavg_round",
    "fedcet_comm_round",
    "fedcet_init",
    "fedcet_local_step",
    "fedcet_run",
    "finite_difference_gradient",
    "fixed_point_residual",
    "frob_inner",
    "gen_data",
    "initial_bound",
    "initial_stacked_state",
    "lyapunov",
    "minimize_by_gradient_descent",
    "oracle_round",
    "oracle_step",
    "problem_digest",
    "rho1",
    "rho2",
    "run_algorithm",
    "scaffold_init",
    "scaffold_round",
    "search",
    "search_with_fraction",
    "vector_digest",
    "weighted_norm_sq",
]
