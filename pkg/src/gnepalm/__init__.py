"""Augmented Lagrangian solver for generalized Nash equilibrium problems."""

from .alcore import (
    KinkRule,
    PenaltyState,
    al_gradient_block,
    al_value,
    assemble_F,
    generalized_jacobian,
    shared_penalty_term,
    shifted_multiplier,
)
from .diagnostics import (
    DiagnosticsVerdict,
    EmfcqStatus,
    PointClass,
    classify_point,
    diagnose,
    emfcq_check,
    feasibility_gnep_residual,
    kkt_residual,
    positive_linear_independence,
)
from .model import (
    ConstraintBundle,
    EvaluationError,
    GnepProblem,
    MultiplierSet,
    ObjectiveBundle,
    PlayerSpec,
    ProblemError,
    validate_problem,
)
from .outer import (
    ConfigError,
    FixedTolerance,
    GeometricTolerance,
    Mode,
    OuterConfig,
    Status,
    TerminationReport,
    initial_multipliers,
    nnls,
    solve,
    solve_variational,
    stopping_residuals,
)
from .plugin import load_problem_plugin
from .problems import (
    OracleConfig,
    OracleVerdict,
    best_response_check,
    box_oracle,
    catalog,
)
from .subsolver import LmConfig, LmResult, LmStatus, SemismoothSystem, lm_solve

__version__ = "0.1.0"

__all__ = [
    "GnepProblem",
    "PlayerSpec",
    "ObjectiveBundle",
    "ConstraintBundle",
    "MultiplierSet",
    "ProblemError",
    "EvaluationError",
    "validate_problem",
    "KinkRule",
    "PenaltyState",
    "shifted_multiplier",
    "al_value",
    "al_gradient_block",
    "assemble_F",
    "generalized_jacobian",
    "shared_penalty_term",
    "LmConfig",
    "LmResult",
    "LmStatus",
    "SemismoothSystem",
    "lm_solve",
    "ConfigError",
    "Mode",
    "Status",
    "OuterConfig",
    "FixedTolerance",
    "GeometricTolerance",
    "TerminationReport",
    "nnls",
    "initial_multipliers",
    "stopping_residuals",
    "solve",
    "solve_variational",
    "kkt_residual",
    "feasibility_gnep_residual",
    "positive_linear_independence",
    "emfcq_check",
    "EmfcqStatus",
    "PointClass",
    "classify_point",
    "diagnose",
    "DiagnosticsVerdict",
    "catalog",
    "OracleConfig",
    "OracleVerdict",
    "box_oracle",
    "best_response_check",
    "load_problem_plugin",
    "__version__",
]
