"""Threshold constants and discrete solutions of a coupled semilinear Neumann system."""
from ._kernels import BACKEND
from .discretization import DiscreteSystem, StatePair
from .domain import build_coefficients, build_uniform_grid, norms
from .errors import DomainError, NumericError, SearchError, UsageError
from .nonlinearity import catalog, catalog_log, check_hypotheses, from_expression, resolve
from .solvers import (SolveConfig, deflated_search, minimize, newton_solve,
                      nonexistence_certificate, perturbation_stability, sweep)
from .thresholds import SearchConfig, compute_thresholds

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DiscreteSystem",
    "StatePair",
    "build_coefficients",
    "build_uniform_grid",
    "norms",
    "DomainError",
    "NumericError",
    "SearchError",
    "UsageError",
    "catalog",
    "catalog_log",
    "check_hypotheses",
    "from_expression",
    "resolve",
    "SolveConfig",
    "deflated_search",
    "minimize",
    "newton_solve",
    "nonexistence_certificate",
    "perturbation_stability",
    "sweep",
    "SearchConfig",
    "compute_thresholds",
]
