"""Simulation and certification toolkit for impulsive delay equations of hematopoiesis type."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .analyze import AnalysisReport, analyze
from .cauchy import cauchy_H, gamma_extrema, gamma_product
from .errors import AssumptionViolation, ConfigError, ConvergenceError, HemapError, NumericalError
from .expr import Expression, parse
from .fixpoint import GridFunction, apply_F, iterate_to_fixed_point, truncation_window
from .halanay import HalanayProblem, certified_envelope, fit_empirical_rate, solve_rate
from .model import DelayTerm, ImpulseSchedule, InitialHistory, ModelSpec, load_model
from .sim import Trajectory, integrate, pairwise_gap

__all__ = [
    "AnalysisReport", "AssumptionViolation", "ConfigError", "ConvergenceError", "DelayTerm",
    "Expression", "GridFunction", "HalanayProblem", "HemapError", "ImpulseSchedule",
    "InitialHistory", "ModelSpec", "NumericalError", "Trajectory", "analyze", "apply_F",
    "cauchy_H", "certified_envelope", "fit_empirical_rate", "gamma_extrema", "gamma_product",
    "integrate", "iterate_to_fixed_point", "load_model", "pairwise_gap", "parse", "solve_rate",
    "truncation_window",
]
