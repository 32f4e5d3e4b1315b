"""Piecewise-linear model of H^1_0(0, 1) on a uniform grid.

A grid function stores the n interior nodal values; both boundary values are
zero.  With hat functions the energy inner product integral of u' v' is exact:

    <u, v> = sum_{i=0..n} (u_{i+1} - u_i)(v_{i+1} - v_i) / h,

and nodal integrals use the trapezoid rule, i.e. the lumped mass h * I.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import GridMismatch


@dataclass(frozen=True)
class Grid:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("grid needs a positive integer number of interior nodes")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        t = np.arange(1, self.n + 1) * self.h
        t.flags.writeable = False
        return t

    @cached_property
    def _unit_stiffness_factor(self):
        # Cholesky factor of tridiag(-1, 2, -1); shared read-only by all solves
        ab = np.empty((2, self.n))
        ab[0, 0] = 0.0
        ab[0, 1:] = -1.0
        ab[1, :] = 2.0
        return cholesky_banded(ab)

    def solve_unit(self, rhs: np.ndarray) -> np.ndarray:
        """Solve tridiag(-1, 2, -1) w = rhs."""
        return cho_solve_banded((self._unit_stiffness_factor, False), rhs)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} nodal values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid, func):
        return cls(grid, func(grid.nodes))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n))

    @classmethod
    def tent(cls, grid):
        t = grid.nodes
        return cls(grid, np.minimum(t, 1.0 - t))

    @classmethod
    def sine(cls, grid, mode=1):
        return cls(grid, np.sin(mode * np.pi * grid.nodes))

    def padded(self):
        """Nodal values including the two zero boundary values."""
        return np.concatenate(([0.0], self.values, [0.0]))

    def __add__(self, other):
        _same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


def _same_grid(u, v):
    if u.grid != v.grid:
        raise GridMismatch(f"grid mismatch: n={u.grid.n} vs n={v.grid.n}")


def energy_inner(a: np.ndarray, b: np.ndarray, h: float) -> float:
    """Energy inner product on raw interior arrays (hot loops skip the wrapper)."""
    da = np.diff(a, prepend=0.0, append=0.0)
    db = np.diff(b, prepend=0.0, append=0.0)
    return float(da @ db) / h


def inner(u: GridFunction, v: GridFunction) -> float:
    _same_grid(u, v)
    return energy_inner(u.values, v.values, u.grid.h)


def norm_sq(u: GridFunction) -> float:
    return inner(u, u)


def sup_abs(u: GridFunction) -> float:
    # piecewise-linear interpolant attains its max at a node
    return float(np.max(np.abs(u.values))) if u.values.size else 0.0


def embedding_ratio(u: GridFunction) -> float:
    """max|u| / ||u||, bounded by 1/2 on H^1_0(0, 1)."""
    nsq = norm_sq(u)
    if nsq <= 0.0:
        raise ValueError("embedding ratio undefined for the zero function")
    return sup_abs(u) / math.sqrt(nsq)


def second_difference(u: GridFunction) -> np.ndarray:
    """Stiffness action (-u_{i-1} + 2 u_i - u_{i+1}) / h**2 at interior nodes."""
    p = u.padded()
    return (2.0 * p[1:-1] - p[:-2] - p[2:]) / u.grid.h ** 2


def solve_dirichlet(g, grid: Grid | None = None) -> GridFunction:
    """Discrete -w'' = g with w(0) = w(1) = 0.

    ``g`` is a GridFunction or an array of nodal load values.  The result is
    the Riesz representative: <w, v> = h * sum(g * v) for every v.
    """
    if isinstance(g, GridFunction):
        grid, load = g.grid, g.values
    else:
        if grid is None:
            raise ValueError("an explicit grid is required for array loads")
        load = np.asarray(g, dtype=float)
    return GridFunction(grid, grid.solve_unit(load * grid.h ** 2))


def lumped_integral(values: np.ndarray, h: float) -> float:
    """Trapezoid rule on interior nodal values with zero boundary terms."""
    return float(np.sum(values)) * h


# -- CSV ----------------------------------------------------------------------


def write_csv(u: GridFunction, path) -> None:
    """Columns t, u including both boundary rows, 17 significant digits."""
    t = np.concatenate(([0.0], u.grid.nodes, [1.0]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "u"])
        for ti, ui in zip(t, u.padded()):
            w.writerow([f"{ti:.17g}", f"{ui:.17g}"])


def read_csv(path) -> GridFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t", "u"]:
        raise ValueError(f"{path}: missing t,u header")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    n = data.shape[0] - 2
    if n < 1:
        raise ValueError(f"{path}: too few rows")
    grid = Grid(n)
    if abs(data[0, 1]) > 0 or abs(data[-1, 1]) > 0:
        raise ValueError(f"{path}: boundary values must be zero")
    if not np.allclose(data[1:-1, 0], grid.nodes, rtol=0, atol=1e-14):
        raise ValueError(f"{path}: abscissae are not a uniform grid")
    return GridFunction(grid, data[1:-1, 1])
