"""Grouped sparse multivariate regression with joint error-precision estimation.

The package fits Y = X B + E where rows of E share an unknown covariance.
Coefficients are selected groupwise with an adaptively weighted group
penalty, the error precision matrix is estimated with an off-diagonal
L1 penalty, and the two problems are solved by alternating stages.
"""

from .core import (
    DesignMatrix,
    GroupPartition,
    GroupedCoefficients,
    PenaltyConfig,
    PrecisionMatrix,
    ResponseMatrix,
    center_columns,
    gradient,
    group_penalty_value,
    loss,
    objective,
    partial_score,
    standardize_columns,
)
from .estimator import (
    EstimatorKind,
    FitReport,
    bic_select,
    bic_select_omega,
    default_lambda_grid,
    fit,
    lambda_max,
)
from .exceptions import (
    ConfigurationError,
    ConformanceError,
    DefinitenessError,
    GlcovError,
    InputError,
    NumericalError,
    StabilityError,
)
from .forecasting import (
    ForecastConfig,
    ForecastResult,
    dot_graph,
    expanding_window,
    export_networks,
)
from .glasso import (
    CovarianceEstimate,
    glasso_kkt_check,
    glasso_solve,
    lambda_omega_grid,
    residual_covariance,
    stabilize_covariance,
)
from .simgen import (
    GroundTruth,
    Scenario,
    generate_dataset,
    make_sigma,
    metrics,
    paired_ttest,
    read_scenario,
    run_replication,
    run_scenario,
    summarize,
    write_scenario,
)
from .solver import (
    BcdTrace,
    SolverSettings,
    adaptive_weights,
    bcd_solve,
    group_kkt_check,
    lasso_init,
    lasso_init_bic,
    soft_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "BcdTrace",
    "ConfigurationError",
    "ConformanceError",
    "CovarianceEstimate",
    "DefinitenessError",
    "DesignMatrix",
    "EstimatorKind",
    "FitReport",
    "ForecastConfig",
    "ForecastResult",
    "GlcovError",
    "GroundTruth",
    "GroupPartition",
    "GroupedCoefficients",
    "InputError",
    "NumericalError",
    "PenaltyConfig",
    "PrecisionMatrix",
    "ResponseMatrix",
    "Scenario",
    "SolverSettings",
    "StabilityError",
    "adaptive_weights",
    "bcd_solve",
    "bic_select",
    "bic_select_omega",
    "center_columns",
    "default_lambda_grid",
    "dot_graph",
    "expanding_window",
    "export_networks",
    "fit",
    "generate_dataset",
    "glasso_kkt_check",
    "glasso_solve",
    "gradient",
    "group_kkt_check",
    "group_penalty_value",
    "lambda_max",
    "lambda_omega_grid",
    "lasso_init",
    "lasso_init_bic",
    "loss",
    "make_sigma",
    "metrics",
    "objective",
    "paired_ttest",
    "partial_score",
    "read_scenario",
    "residual_covariance",
    "run_replication",
    "run_scenario",
    "soft_threshold",
    "stabilize_covariance",
    "standardize_columns",
    "summarize",
    "write_scenario",
    "__version__",
]
