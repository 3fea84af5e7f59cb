"""Gaussian-process Thompson sampling with fractional-posterior variance inflation."""

__version__ = "0.1.0"

from .diagnostics import (  # noqa: E402
    GammaCurve,
    cumvar_vs_gamma,
    fit_log_slope,
    greedy_gamma_curve,
    information_gain,
    renyi_divergence,
    rkhs_identity_suite,
    rkhs_norm_identity,
)
from .errors import (  # noqa: E402
    ConfigError,
    FracGPError,
    HyperparameterError,
    InputError,
    InvariantViolation,
    NumericalError,
    RunAborted,
    SaturationError,
)
from .kernels import KernelSpec, eval_kernel, gram_matrix, kernel_matrix, nystrom_spectrum  # noqa: E402
from .loop import ExperimentConfig, RegretTrace, run_gpts, saturation_trace  # noqa: E402
from .objectives import RKHSFunction, locate_maximum, synthesize_objective  # noqa: E402
from .posterior import PosteriorState, incorporate, init_state, predict, rebuild  # noqa: E402
from .rates import RateModel, alpha_from_horizon  # noqa: E402
from .sampler import generate_candidates, sample_path, select_argmax  # noqa: E402

__all__ = [
    "ConfigError", "ExperimentConfig", "FracGPError", "GammaCurve", "HyperparameterError",
    "InputError", "InvariantViolation", "KernelSpec", "NumericalError", "PosteriorState",
    "RKHSFunction", "RateModel", "RegretTrace", "RunAborted", "SaturationError",
    "alpha_from_horizon", "cumvar_vs_gamma", "eval_kernel", "fit_log_slope",
    "generate_candidates", "gram_matrix", "greedy_gamma_curve", "incorporate",
    "information_gain", "init_state", "kernel_matrix", "locate_maximum",
    "nystrom_spectrum", "predict", "rebuild", "renyi_divergence", "rkhs_identity_suite",
    "rkhs_norm_identity", "run_gpts", "sample_path", "saturation_trace", "select_argmax",
    "synthesize_objective",
]
