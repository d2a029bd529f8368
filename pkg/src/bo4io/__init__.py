"""Derivative-free inverse optimization of constrained decision models.

Estimate unknown forward-problem parameters from observed decisions by
minimizing a decision loss with a Gaussian-process surrogate, then assess
identifiability with profile-likelihood confidence intervals computed from
the same surrogate.
"""
from .acquisition import AcquisitionConfig, lcb, minimize_acquisition, sobol_points
from .bo_loop import BOConfig, BOResult, TraceRow, initial_design, read_trace, run
from .datagen import Dataset, GenResult, GenSpec, generate, search_domain
from .domain import ParameterDomain, project, project_sum_capped
from .gp import (
    EvaluationDataset,
    GPModel,
    KernelConfig,
    NumericalError,
    build_model,
    fit,
    log_marginal_likelihood,
    posterior,
)
from .loss import (
    FbaBinding,
    GenPoolingBinding,
    LossConfig,
    LossEval,
    Observation,
    PoolingBinding,
    decision_error,
    evaluate_loss,
    parameter_error,
    read_observations,
    write_observations,
)
from .profile import (
    ProfileConfig,
    ProfileResult,
    chi2_quantile,
    profile_parameter,
    read_profile,
    total_width,
    write_profile,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "BOConfig",
    "BOResult",
    "Dataset",
    "EvaluationDataset",
    "FbaBinding",
    "GPModel",
    "GenPoolingBinding",
    "GenResult",
    "GenSpec",
    "KernelConfig",
    "LossConfig",
    "LossEval",
    "NumericalError",
    "Observation",
    "ParameterDomain",
    "PoolingBinding",
    "ProfileConfig",
    "ProfileResult",
    "TraceRow",
    "build_model",
    "chi2_quantile",
    "decision_error",
    "evaluate_loss",
    "fit",
    "generate",
    "initial_design",
    "lcb",
    "log_marginal_likelihood",
    "minimize_acquisition",
    "parameter_error",
    "posterior",
    "profile_parameter",
    "project",
    "project_sum_capped",
    "read_observations",
    "read_profile",
    "read_trace",
    "run",
    "search_domain",
    "sobol_points",
    "total_width",
    "write_observations",
    "write_profile",
]
