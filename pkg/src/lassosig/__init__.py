"""Lasso path, covariance test, refit test and desparsified-lasso inference."""

__version__ = "0.1.0"

from .covtest import CovDrop, CovSequence, CovStep, assign_cov_pvals, cov_drop, cov_sequence, select_cov_stop
from .design import DesignMatrix
from .desparsified import (
    DebiasedFit,
    DesparsConfig,
    NodewiseRow,
    debias,
    despars_inference,
    nodewise_lasso,
    nodewise_rows,
    scaled_lasso,
)
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DegenerateFitError,
    DimensionError,
    IdentityMismatchError,
    InputFormatError,
    LassoSigError,
    PathRangeError,
    SingularDesignError,
)
from .lasso import LassoFit, LassoPath, coef_at, compute_path, lambda_max, objective, solve_lasso, solve_lasso_restricted
from .multitest import AdjustedPValues, holm_adjust, reject_at
from .refit import RefitDrop, ls_refit, order_statistic_null_pvalue, refit_drop, refit_fixed_pvalue, refit_sequence
from .simulation import ScenarioConfig, ScenarioSummary, prob_event_B, run_table_comparison
