"""Shooting on the initial slope, independent of the variational machinery.

For a slope s the miss m(s) = u(1; s) of the initial value problem

    u'' = -lam * alpha(t) * f(u),  u(0) = 0,  u'(0) = s

is computed with classical RK4; boundary roots of m are located by a
geometric slope ladder followed by Brent's method.  The same integrator,
applied to the signed linear equation, scans the Dirichlet spectrum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from . import _kernels
from .errors import Diverged, Resonance, RejectedSolution
from .function_model import Nonlinearity, Weight

DEFAULT_STEPS = 10_000
DEFAULT_RUNGS = 64
SHOOT_TOL = 1e-10
# |m(s)| <= RESONANCE_TOL * s for every slope marks an eigenvalue
RESONANCE_TOL = 1e-8
HOMOGENEITY_TOL = 1e-9


@dataclass
class Trajectory:
    t: np.ndarray
    u: np.ndarray
    du: np.ndarray

    @property
    def n_steps(self):
        return self.t.size - 1

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "u", "du"])
            for row in zip(self.t, self.u, self.du):
                w.writerow([f"{v:.17g}" for v in row])


@dataclass
class ShotSolution:
    lam: float
    slope: float
    trajectory: Trajectory
    boundary_miss: float
    energy: float
    min_interior: float

    def to_dict(self):
        return {
            "lambda": self.lam,
            "slope": self.slope,
            "boundary_miss": self.boundary_miss,
            "energy": self.energy,
            "min_interior": self.min_interior,
            "n_steps": self.trajectory.n_steps,
        }


class ShootingProblem:
    """f, alpha and the RK4 resolution, with alpha pre-sampled on the step grid."""

    def __init__(self, f: Nonlinearity, alpha: Weight | None = None, n_steps: int = DEFAULT_STEPS, spec=None):
        if n_steps < 100 or n_steps % 2:
            raise ValueError("n_steps must be an even integer >= 100 (Simpson energy)")
        self.f = f
        self.alpha = alpha if alpha is not None else Weight.constant(1.0)
        self.n_steps = int(n_steps)
        self._spec = spec if spec is not None else _kernels.kernel_spec(f)
        t = np.arange(n_steps + 1) / n_steps
        self.a_node = np.ascontiguousarray(self.alpha(t), dtype=float)
        self.a_mid = np.ascontiguousarray(self.alpha((np.arange(n_steps) + 0.5) / n_steps), dtype=float)

    def batch(self, lam, slopes):
        lam = np.ascontiguousarray(np.broadcast_to(np.asarray(lam, dtype=float), np.shape(slopes)).ravel())
        slopes = np.ascontiguousarray(np.asarray(slopes, dtype=float).ravel())
        return _kernels.rk4_batch(*self._spec, self.a_node, self.a_mid, lam, slopes, self.n_steps)

    def miss(self, lam, s):
        return float(self.batch(lam, np.array([s]))[0][0])

    def trajectory(self, lam, s):
        us, vs, last = _kernels.rk4_path(*self._spec, self.a_node, self.a_mid, float(lam), float(s), self.n_steps)
        if last < self.n_steps:
            raise Diverged(f"trajectory blew up at t = {last / self.n_steps:.6g}", when=last / self.n_steps)
        t = np.arange(self.n_steps + 1) / self.n_steps
        return Trajectory(t, us, vs)


def integrate(f, alpha, lam, s, n_steps=DEFAULT_STEPS) -> Trajectory:
    """RK4 trajectory of u'' = -lam alpha f(u) from u(0) = 0, u'(0) = s."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    return ShootingProblem(f, alpha, n_steps).trajectory(lam, s)


def _homogeneous_zero(s_lo, m_lo, s_hi, m_hi):
    homogeneous = abs(m_hi - (s_hi / s_lo) * m_lo) <= HOMOGENEITY_TOL * s_hi
    return homogeneous and abs(m_lo) <= RESONANCE_TOL * s_lo and abs(m_hi) <= RESONANCE_TOL * s_hi


def _finish(prob, lam, s_lo, s_hi, shoot_tol):
    root = brentq(lambda s: prob.miss(lam, s), s_lo, s_hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=300)
    traj = prob.trajectory(lam, root)
    sol = ShotSolution(
        lam=float(lam),
        slope=float(root),
        trajectory=traj,
        boundary_miss=abs(float(traj.u[-1])),
        energy=float(simpson(traj.du ** 2, dx=1.0 / prob.n_steps)),
        min_interior=float(np.min(traj.u[1:-1])),
    )
    if sol.boundary_miss > shoot_tol:
        raise RejectedSolution(f"boundary miss {sol.boundary_miss:.3g} exceeds {shoot_tol:g}", sol)
    if sol.min_interior <= 0.0:
        raise RejectedSolution(f"not positive on ]0,1[: min u = {sol.min_interior:.3g}", sol)
    if np.max(traj.u) > prob.f.xi_max:
        raise RejectedSolution("trajectory leaves the certified range of f", sol)
    return sol


def shoot(f, alpha, lam, bracket, n_steps=DEFAULT_STEPS, shoot_tol=SHOOT_TOL, problem=None):
    """Positive solution with u'(0) inside ``bracket``, or None without a sign change.

    Raises Resonance when the miss vanishes at both ends in proportion to the
    slope (linear f at an eigenvalue), and RejectedSolution when the root found
    is not a positive solution.
    """
    s_lo, s_hi = map(float, bracket)
    if not 0 < s_lo < s_hi:
        raise ValueError("bracket must satisfy 0 < s_lo < s_hi")
    prob = problem if problem is not None else ShootingProblem(f, alpha, n_steps)
    m_lo, m_hi = prob.batch(lam, np.array([s_lo, s_hi]))[0]
    # at an eigenvalue the miss is roundoff and its sign is noise, so test first
    if _homogeneous_zero(s_lo, m_lo, s_hi, m_hi):
        raise Resonance(f"lam = {lam} is an eigenvalue: u(1; s) vanishes for every slope")
    if m_lo * m_hi > 0:
        return None
    return _finish(prob, lam, s_lo, s_hi, shoot_tol)


def slope_ladder(r, s_max=None, rungs=DEFAULT_RUNGS):
    s_lo = 1e-6 * math.sqrt(r)
    s_hi = 10.0 * math.sqrt(r) if s_max is None else float(s_max)
    return np.geomspace(s_lo, s_hi, rungs)


def _first_sign_change(m):
    prod = m[:-1] * m[1:]
    hits = np.flatnonzero((prod < 0) | (m[1:] == 0))
    return int(hits[0]) if hits.size else None


def shoot_auto(f, alpha, lam, r, guess=None, n_steps=DEFAULT_STEPS, problem=None, s_max=None):
    """Shoot at one lam: try a bracket around ``guess`` first, then the full ladder."""
    prob = problem if problem is not None else ShootingProblem(f, alpha, n_steps)
    if guess is not None and guess > 0:
        sol = shoot(f, alpha, lam, (0.5 * guess, 2.0 * guess), problem=prob)
        if sol is not None:
            return sol
    ladder = slope_ladder(r, s_max)
    m = prob.batch(lam, ladder)[0]
    if _homogeneous_zero(ladder[0], m[0], ladder[-1], m[-1]):
        raise Resonance(f"lam = {lam} is an eigenvalue")
    k = _first_sign_change(m)
    if k is None:
        return None
    return shoot(f, alpha, lam, (ladder[k], ladder[k + 1]), problem=prob)


def eigen_scan(c, alpha=None, lam_range=(0.0, 50.0), grid=400, n_steps=DEFAULT_STEPS, scaling="primitive"):
    """Eigenvalues of -u'' = lam * k * alpha(t) * u, u(0) = u(1) = 0, inside ``lam_range``.

    With ``scaling="primitive"`` the coefficient is k = c, read off
    F(xi) = c xi**2; ``"derivative"`` uses k = 2c, the slope of f itself.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if scaling not in ("primitive", "derivative"):
        raise ValueError("scaling is 'primitive' or 'derivative'")
    coef = c if scaling == "primitive" else 2.0 * c
    lo, hi = map(float, lam_range)
    if not lo < hi:
        return []
    prob = ShootingProblem(Nonlinearity.zero(), alpha, n_steps, spec=_kernels.signed_linear_spec(coef))
    lams = np.linspace(lo, hi, int(grid) + 1)[1:-1]
    m = prob.batch(lams, np.ones_like(lams))[0]
    exact = [float(l) for l, v in zip(lams, m) if v == 0.0]
    idx = np.flatnonzero(m[:-1] * m[1:] < 0)
    a, b = lams[idx].copy(), lams[idx + 1].copy()
    ma = m[idx].copy()
    for _ in range(80):
        if a.size == 0 or np.all(b - a <= 4 * np.finfo(float).eps * np.abs(b)):
            break
        mid = 0.5 * (a + b)
        mm = prob.batch(mid, np.ones_like(mid))[0]
        left = ma * mm <= 0
        b = np.where(left, mid, b)
        a = np.where(left, a, mid)
        ma = np.where(left, ma, mm)
    return sorted(exact + [float(v) for v in 0.5 * (a + b)])


@dataclass
class SweepRow:
    lam: float
    success: bool
    status: str
    slope: float = math.nan
    energy: float = math.nan
    boundary_miss: float = math.nan
    min_interior: float = math.nan

    def csv_row(self):
        return [f"{self.lam:.17g}", int(self.success), f"{self.slope:.17g}", f"{self.energy:.17g}",
                f"{self.boundary_miss:.17g}", f"{self.min_interior:.17g}"]


SWEEP_COLUMNS = ["lambda", "success", "slope", "energy", "boundary_miss", "min_interior"]


def lambda_sweep(ctx, lam_grid, r, n_steps=DEFAULT_STEPS, rungs=DEFAULT_RUNGS, s_max=None):
    """Which lam admit a positive shooting solution with energy below r.

    ``ctx`` is anything with ``f`` and ``alpha`` attributes (an EnergyContext).
    Every lam gets a row; failures are recorded, never raised.
    """
    lam_grid = np.asarray(lam_grid, dtype=float)
    if lam_grid.size > 1 and not np.all(np.diff(lam_grid) > 0):
        raise ValueError("lam_grid must be increasing")
    prob = ShootingProblem(ctx.f, ctx.alpha, n_steps)
    ladder = slope_ladder(r, s_max, rungs)
    lam_flat = np.repeat(lam_grid, ladder.size)
    s_flat = np.tile(ladder, lam_grid.size)
    m_all, _, _, _, _, blow = prob.batch(lam_flat, s_flat)
    m_all = m_all.reshape(lam_grid.size, ladder.size)
    blow = blow.reshape(lam_grid.size, ladder.size)
    rows = []
    for i, lam in enumerate(lam_grid):
        m = m_all[i]
        finite = blow[i] < 0
        if not finite.all():
            # keep the rungs below the first blow-up
            cut = int(np.argmin(finite))
            m = m[:cut]
        if m.size > 1 and _homogeneous_zero(ladder[0], m[0], ladder[m.size - 1], m[-1]):
            rows.append(SweepRow(float(lam), False, "eigenvalue"))
            continue
        k = _first_sign_change(m) if m.size > 1 else None
        if k is None:
            rows.append(SweepRow(float(lam), False, "diverged" if m.size < ladder.size else "none"))
            continue
        try:
            sol = shoot(ctx.f, ctx.alpha, lam, (ladder[k], ladder[k + 1]), problem=prob)
        except RejectedSolution as exc:
            s = exc.solution
            if s is None:
                rows.append(SweepRow(float(lam), False, "rejected"))
            else:
                rows.append(SweepRow(float(lam), False, "rejected", s.slope, s.energy, s.boundary_miss, s.min_interior))
            continue
        except (Resonance, Diverged) as exc:
            rows.append(SweepRow(float(lam), False, type(exc).__name__.lower()))
            continue
        if sol is None:
            rows.append(SweepRow(float(lam), False, "none"))
            continue
        ok = sol.energy < r
        rows.append(SweepRow(float(lam), ok, "solution" if ok else "energy_above_r",
                             sol.slope, sol.energy, sol.boundary_miss, sol.min_interior))
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow(row.csv_row())


def success_fraction(rows, lam_range):
    """Share of ``lam_range`` covered by successful rows, each counted as one grid step."""
    lams = np.array([r.lam for r in rows])
    if lams.size < 2:
        return 0.0
    step = float(np.median(np.diff(lams)))
    lo, hi = lam_range
    return sum(r.success for r in rows) * step / (hi - lo)
