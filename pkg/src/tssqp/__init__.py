"""Two-stepsize stochastic SQP for equality-constrained stochastic objectives."""

from ._kernels import backend_name
from .diagnostics import (
    AuditReport,
    MeritInputs,
    audit_trace,
    error_measures,
    merit_phi,
    model_l,
    model_reduction,
    nu_upper_bound,
    tau_min,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyInput,
    EvaluationFailure,
    IndefiniteReducedHessian,
    InvalidLineSearchConfig,
    NonPositiveBeta,
    ParseError,
    RankDeficientJacobian,
    TssqpError,
    UnknownProblem,
)
from .harness import (
    ExperimentPlan,
    ResultRow,
    run_experiment,
    run_seed,
    summarize,
    to_csv,
    to_json,
)
from .linalg import (
    KktSolution,
    StepDecomposition,
    compose_direction,
    least_squares_multiplier,
    normal_component,
    null_space_basis,
    solve_newton_kkt,
    solve_step,
    tangential_component,
)
from .problems import (
    Evaluation,
    NoiseModel,
    Problem,
    builtin_names,
    builtin_suite,
    evaluate,
    load_problem,
    sample_stochastic_gradient,
    standard_normal_vector,
)
from .solver import (
    IterationRecord,
    SolverConfig,
    SolverState,
    Trace,
    init_state,
    run,
    run_ablation,
    step,
)
from .stepsize import (
    AdaptiveState,
    FixedSchedule,
    adaptive_update,
    backtrack_count_bound,
    fixed_alpha_range,
    fixed_beta,
    safeguarded_backtrack,
)

__version__ = "0.1.0"
