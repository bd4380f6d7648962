"""Monotone discretisation, bounded solves and the nested-domain construction."""

from .discretize import BACKEND, Discretization
from .exterior import ExteriorShift, reduce_exterior_data
from .perron import BracketError, PerronSchedule, perron_solve
from .scheme import ConvergenceError, SchemeState, residual, solve_bounded

__all__ = ["BACKEND", "BracketError", "ConvergenceError", "Discretization", "ExteriorShift",
           "PerronSchedule", "SchemeState", "perron_solve", "reduce_exterior_data", "residual",
           "solve_bounded"]
