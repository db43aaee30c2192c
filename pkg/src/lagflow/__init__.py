"""Numerical laboratory for the graphical Lagrangian mean curvature flow.

``u_t = sum_i arctan(lambda_i(D^2 u)) - theta0`` on cube grids in
dimensions 1-3, with checks of the a priori estimates for convex solutions.
"""

from .errors import (
    ChecksumError,
    ConfigurationError,
    ContractViolation,
    CoverageError,
    DivergenceError,
    FitError,
    FormatVersionError,
    HypothesisError,
    LagflowError,
    LoadError,
    RangeError,
    SolverError,
    TruncatedFileError,
)
from .estimates import (
    BarrierSpec,
    EstimateReport,
    KorevaarParams,
    barrier_residual,
    check_jacobi,
    gradient_bound_check,
    height_bound_check,
    hessian_bound_check,
    hessian_bound_constant,
    korevaar_fields,
    main_constant,
    theta_monotonicity_check,
)
from .flow import (
    FlowState,
    SolverConfig,
    Trajectory,
    convexity_monitor,
    equation_residual,
    evolve,
    rhs,
    solve_stationary,
    step,
)
from .geometry import (
    HessianSpectrum,
    MetricData,
    apply_L,
    covariant_grad_sq,
    eigen_sym,
    induced_metric,
    lagrangian_angle,
)
from .grid import BallMask, GridSpec, ScalarField, fd_gradient, fd_hessian, make_ball_mask
from .initial_data import generate_initial_data
from .liouville import GrowthReport, QuadraticFit, RescaleSpec, growth_ratio, quadratic_fit, rescale
from .persistence import load_trajectory, save_trajectory
from .runner import RunConfig, run

__version__ = "0.1.0"

__all__ = [
    "BallMask",
    "BarrierSpec",
    "ChecksumError",
    "ConfigurationError",
    "ContractViolation",
    "CoverageError",
    "DivergenceError",
    "EstimateReport",
    "FitError",
    "FlowState",
    "FormatVersionError",
    "GridSpec",
    "GrowthReport",
    "HessianSpectrum",
    "HypothesisError",
    "KorevaarParams",
    "LagflowError",
    "LoadError",
    "MetricData",
    "QuadraticFit",
    "RangeError",
    "RescaleSpec",
    "RunConfig",
    "ScalarField",
    "SolverConfig",
    "SolverError",
    "Trajectory",
    "TruncatedFileError",
    "apply_L",
    "barrier_residual",
    "check_jacobi",
    "convexity_monitor",
    "covariant_grad_sq",
    "eigen_sym",
    "equation_residual",
    "evolve",
    "fd_gradient",
    "fd_hessian",
    "generate_initial_data",
    "gradient_bound_check",
    "growth_ratio",
    "height_bound_check",
    "hessian_bound_check",
    "hessian_bound_constant",
    "induced_metric",
    "korevaar_fields",
    "lagrangian_angle",
    "load_trajectory",
    "main_constant",
    "make_ball_mask",
    "quadratic_fit",
    "rescale",
    "rhs",
    "run",
    "save_trajectory",
    "solve_stationary",
    "step",
    "theta_monotonicity_check",
]
