"""The functional J(u) = integral of alpha F(u) and its energy-space gradient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discrete_space import Grid, GridFunction, energy_inner, solve_dirichlet
from .errors import GridMismatch
from .function_model import Nonlinearity, Primitive, Weight


@dataclass(frozen=True, eq=False)
class EnergyContext:
    f: Nonlinearity
    alpha: Weight
    grid: Grid
    F: Primitive = None
    alpha_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.F is None:
            object.__setattr__(self, "F", Primitive(self.f))
        a = np.asarray(self.alpha(self.grid.nodes), dtype=float)
        if not np.all(a >= self.alpha.alpha_min) or not np.all(a > 0):
            raise ValueError("weight drops below its positive minimum on the grid")
        a.flags.writeable = False
        object.__setattr__(self, "alpha_nodes", a)

    @classmethod
    def build(cls, f, alpha=None, n=511):
        return cls(f, alpha if alpha is not None else Weight.constant(1.0), Grid(n))

    # raw-array kernels; the public functions below wrap GridFunctions

    def value(self, u: np.ndarray) -> float:
        self.f.check_domain(u, "node")
        return float(self.alpha_nodes @ self.F.F(u)) * self.grid.h

    def load(self, u: np.ndarray) -> np.ndarray:
        self.f.check_domain(u, "node")
        return self.alpha_nodes * self.f(u)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return self.grid.solve_unit(self.load(u) * self.grid.h ** 2)

    def dual_pairing(self, u: np.ndarray) -> float:
        """<J'(u), u> assembled from the load, h * sum(alpha f(u) u)."""
        return float(self.load(u) @ u) * self.grid.h


def _values(ctx, u):
    if isinstance(u, GridFunction):
        if u.grid != ctx.grid:
            raise GridMismatch("grid function does not live on the context grid")
        return u.values
    return np.asarray(u, dtype=float)


def J(ctx: EnergyContext, u) -> float:
    """Lumped value h * sum(alpha_i F(u_i)); negative node values contribute 0."""
    return ctx.value(_values(ctx, u))


def grad_J(ctx: EnergyContext, u) -> GridFunction:
    """Riesz representative of J'(u): the Dirichlet solve of the load alpha f(u)."""
    return solve_dirichlet(ctx.load(_values(ctx, u)), ctx.grid)


def pairing_gap(ctx: EnergyContext, u) -> float:
    """2 J(u) - <J'(u), u>; positive when phi > 0 at some positive node."""
    vals = _values(ctx, u)
    w = ctx.gradient(vals)
    return 2.0 * ctx.value(vals) - energy_inner(w, vals, ctx.grid.h)


def phi_quadrature(ctx: EnergyContext, u) -> float:
    """h * sum(alpha_i phi(u_i)), the same gap assembled node by node."""
    vals = _values(ctx, u)
    ctx.f.check_domain(vals, "node")
    return float(ctx.alpha_nodes @ ctx.F.phi(vals)) * ctx.grid.h
