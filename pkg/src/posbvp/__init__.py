"""Small-energy positive solutions of -u'' = lam alpha(t) f(u), u(0) = u(1) = 0.

The variational side (ball and sphere maxima of the discrete energy, the
auxiliary function eta and the multiplier interval it produces) lives in
``variational``; ``shooting`` is an independent ODE oracle for the same
problem.
"""

from .discrete_space import Grid, GridFunction, embedding_ratio, inner, norm_sq, solve_dirichlet
from .energy import EnergyContext, J, grad_J, pairing_gap
from .errors import (
    DomainError,
    EmptyInterval,
    HypothesisViolation,
    NoNontrivialSolution,
    NotConverged,
    PosBVPError,
    Resonance,
)
from .function_model import Nonlinearity, Weight, check_nonincreasing, check_not_constant
from .shooting import eigen_scan, lambda_sweep, shoot, shoot_auto
from .variational import characterize, estimate, fixed_point_solve, lambda_interval

__all__ = [
    "DomainError", "EmptyInterval", "EnergyContext", "Grid", "GridFunction", "HypothesisViolation", "J",
    "NoNontrivialSolution", "Nonlinearity", "NotConverged", "PosBVPError", "Resonance", "Weight",
    "characterize", "check_nonincreasing", "check_not_constant", "eigen_scan", "embedding_ratio",
    "estimate", "fixed_point_solve", "grad_J", "inner", "lambda_interval", "lambda_sweep", "norm_sq",
    "pairing_gap", "shoot", "shoot_auto", "solve_dirichlet",
]
