"""Large solutions of fractional Hamilton-Jacobi equations in one dimension."""

from .analysis import RateFit, RateFitError, fit_boundary_rate, verify_family
from .barriers import Barrier, barrier_pair, build_barrier, expansion_probe, verify_barrier
from .config import ConfigError, ExperimentConfig
from .constants import (CaseMismatchError, c_curve, c_extremal, c_kernel, c_operator, c_tilde,
                        scale_constants)
from .core import (DomainError, DomainGeometry, ExteriorData, ProblemSpec, SourceSpec,
                   beta_exponent, critical_exponents, lambda0, blowup_cases, validate_problem)
from .fields import DistanceField, GridFunction, Point
from .fracop import QuadratureError, apply_on_grid, eval_extremal, eval_linear_pv, eval_operator
from .kernels import Kernel, OperatorSpec, physical_kernel, unit_kernel

__all__ = [
    "Barrier", "CaseMismatchError", "ConfigError", "DistanceField", "DomainError",
    "DomainGeometry", "ExperimentConfig", "ExteriorData", "GridFunction", "Kernel",
    "OperatorSpec", "Point", "ProblemSpec", "QuadratureError", "RateFit", "RateFitError",
    "SourceSpec", "apply_on_grid", "barrier_pair", "beta_exponent", "build_barrier",
    "c_curve", "c_extremal", "c_kernel", "c_operator", "c_tilde", "critical_exponents",
    "eval_extremal", "eval_linear_pv", "eval_operator", "expansion_probe", "fit_boundary_rate",
    "lambda0", "physical_kernel", "scale_constants", "blowup_cases", "unit_kernel",
    "validate_problem", "verify_barrier", "verify_family",
]
