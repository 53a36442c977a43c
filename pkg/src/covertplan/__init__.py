"""covertplan: Fisher-information masking of MDP sensing plans.

Plan with an occupation-measure LP, shrink the determinant of the
information matrix an observing adversary can achieve about the plan's
state-action chain (at a controlled operation-cost penalty), and verify the
masking by simulating a maximum-likelihood adversary against the
Cramer-Rao bound.
"""

from .adversary import (
    AdversaryEstimate,
    CrbReport,
    TrajectorySample,
    TvError,
    crb_check,
    extract_estimates,
    mle_estimate,
    sample_trajectory,
    tv_error,
)
from .errors import (
    BcdNoProgress,
    CalibrationError,
    ConfigError,
    CovertPlanError,
    DimensionMismatch,
    EmptySample,
    Infeasible,
    InfeasibleLp,
    InfeasibleStart,
    NoConvergence,
    NonPositiveEntry,
    NotIrreducible,
    SolverStall,
    StepTooLarge,
    Unbounded,
    UnvisitedRow,
    ZeroStateMass,
)
from .fim import (
    AugmentedChain,
    FisherReport,
    assemble_fim,
    augment,
    fim_finite_difference_oracle,
    fisher_report,
    log_det_fim_oracle,
    log_det_fim_paper,
    stationary_distribution,
)
from .masking import (
    MaskingConfig,
    MaskingResult,
    mask_max_entropy,
    mask_state_action_cost,
    mask_total_cost,
    mask_transition,
    match_cost_perturbation,
)
from .mdp import (
    MdpModel,
    OccupationMeasure,
    Policy,
    average_cost,
    extract_policy,
    occupation_from_policy,
    relative_value_iteration,
    solve_average_cost_lp,
)
from .optim import (
    AffinePolytope,
    LpProblem,
    NlpProblem,
    SolveTrace,
    lp_solve,
    nlp_minimize,
    nlp_minimize_multistart,
    project_to_affine_nonneg,
)
from .scenario import ScenarioParams, build_cost, build_model, build_transition, paper_default_scenario

__version__ = "0.1.0"

__all__ = [
    "AdversaryEstimate", "AffinePolytope", "AugmentedChain", "BcdNoProgress",
    "CalibrationError", "ConfigError", "CovertPlanError", "CrbReport",
    "DimensionMismatch", "EmptySample", "FisherReport", "Infeasible",
    "InfeasibleLp", "InfeasibleStart", "LpProblem", "MaskingConfig",
    "MaskingResult", "MdpModel", "NlpProblem", "NoConvergence",
    "NonPositiveEntry", "NotIrreducible", "OccupationMeasure", "Policy",
    "ScenarioParams", "SolveTrace", "SolverStall", "StepTooLarge",
    "TrajectorySample", "TvError", "Unbounded", "UnvisitedRow",
    "ZeroStateMass", "assemble_fim", "augment", "average_cost",
    "build_cost", "build_model", "build_transition", "crb_check",
    "extract_estimates", "extract_policy", "fim_finite_difference_oracle",
    "fisher_report", "log_det_fim_oracle", "log_det_fim_paper", "lp_solve",
    "mask_max_entropy", "mask_state_action_cost", "mask_total_cost",
    "mask_transition", "match_cost_perturbation", "mle_estimate",
    "nlp_minimize", "nlp_minimize_multistart", "occupation_from_policy",
    "paper_default_scenario", "project_to_affine_nonneg",
    "relative_value_iteration", "sample_trajectory",
    "solve_average_cost_lp", "stationary_distribution", "tv_error",
]
