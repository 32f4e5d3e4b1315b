"""Ball and sphere maxima of J, the auxiliary function eta, and u = lam J'(u).

With B_r = {||u||**2 <= r}:

    beta_r  = sup_{B_r} J
    delta_r = sup_{B_r minus 0} J(u) / ||u||**2
    eta(s)  = sup_{y in B_r} (r - ||y||**2) / (s - J(y)),   s > beta_r

and the multiplier interval is I = eta(]beta_r, r delta_r[) / 2.

Because the ratio in eta only sees ||y||**2 and J(y), the supremum reduces
to a scalar one over tau = ||y||**2 in [0, r] with J replaced by its sphere
maximum g(tau).  A ``SphereProfile`` caches (tau, g(tau), maximiser) samples;
eta is evaluated as a maximum over that shared pool, which makes every
sampled curve a maximum of functions convex and decreasing in s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .discrete_space import GridFunction, energy_inner
from .energy import EnergyContext, pairing_gap
from .errors import (
    Diverged,
    DomainError,
    EmptyInterval,
    HypothesisViolation,
    NoNontrivialSolution,
    NotConverged,
    PosBVPError,
)
from .function_model import DEFAULT_PHI_TOL, check_nonincreasing, hypothesis_report
from .shooting import ShootingProblem, shoot_auto

DEFAULT_RESTARTS = 16
N_RADII = 64
RHO2_MIN_FACTOR = 1e-6
EPS_EDGE = 1e-3
EPS_ABS = 1e-15
GAP_TOL = 1e-7  # relative to delta_r
N_ETA = 32
FP_TOL = 1e-10
ORACLE_TOL = 1e-3
THETA = 0.5
ASCENT_MAX_ITER = 500
REFINE_RESTARTS = 2


@dataclass
class AscentResult:
    u: np.ndarray
    value: float
    converged: bool
    iterations: int


def start_profiles(grid, count, seed=0):
    """Deterministic restart shapes: sin(pi t), the tent, then smooth random mixes.

    The list for ``count`` is a prefix of the list for any larger count.
    """
    t = grid.nodes
    shapes = [np.sin(np.pi * t), np.minimum(t, 1.0 - t)]
    rng = np.random.default_rng(seed)
    modes = np.arange(1, 9)
    basis = np.sin(np.pi * np.outer(modes, t))
    while len(shapes) < count:
        coef = rng.standard_normal(modes.size) / modes
        v = coef @ basis
        if v.max() <= 0:
            v = -v
        shapes.append(v)
    return shapes[:count]


def _ascend(ctx: EnergyContext, u0, rho2, on_sphere=True, max_iter=ASCENT_MAX_ITER):
    """Projected gradient ascent of J on the sphere (or ball) ||u||**2 = rho2.

    The step uses the Riesz gradient and starts long: for convex J the long
    step is a power-iteration step, for other J it is cut back until J stops
    decreasing.
    """
    h = ctx.grid.h
    radius = math.sqrt(rho2)

    def project(v):
        nsq = energy_inner(v, v, h)
        if nsq <= 0.0:
            return v
        if on_sphere or nsq > rho2:
            return v * (radius / math.sqrt(nsq))
        return v

    u = project(np.array(u0, dtype=float))
    val = ctx.value(u)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = ctx.gradient(u)
        wn = math.sqrt(max(energy_inner(w, w, h), 0.0))
        if wn == 0.0:
            converged = True
            break
        # the long step: u + tau w with tau -> infinity, i.e. the direction of w
        cand = project(w if on_sphere else u + (1e6 * radius / wn) * w)
        cv = ctx.value(cand)
        tau = radius / wn
        while cv < val - 1e-15 * abs(val) and tau > 1e-12 * radius / wn:
            cand = project(u + tau * w)
            cv = ctx.value(cand)
            tau *= 0.25
        if cv < val - 1e-15 * abs(val):
            converged = True
            break
        scale = max(float(np.max(np.abs(u))), 1e-300)
        change = float(np.max(np.abs(cand - u))) / scale
        gain = cv - val
        u, val = cand, cv
        # the Dirichlet solve carries ~1e-11 relative noise, so do not ask for less
        if change <= 1e-9 and gain <= 1e-14 * abs(val):
            converged = True
            break
    return AscentResult(u, val, converged, it)


def _best(results):
    best = None
    for res in results:
        if best is None or res.value > best.value:
            best = res
    return best


def sphere_maximize(ctx: EnergyContext, rho2, restarts=DEFAULT_RESTARTS, seed=0, warm=None):
    """Best maximiser of J on the sphere ||u||**2 = rho2 over the restart set."""
    if not rho2 > 0:
        raise DomainError("sphere radius must be positive")
    starts = ([warm] if warm is not None else []) + start_profiles(ctx.grid, restarts, seed)
    best = _best(_ascend(ctx, u0, rho2) for u0 in starts)
    return best


@dataclass
class BallMaximum:
    u_hat: GridFunction
    beta: float
    converged: bool


def ball_max(ctx: EnergyContext, r, restarts=DEFAULT_RESTARTS, seed=0, probes=()):
    """beta_r = sup of J over the ball, by projected ascent from a restart set.

    The zero element is always a probe, so beta_r >= J(0) = 0; further probes
    (already in the ball) only raise the estimate.
    """
    if not r > 0:
        raise DomainError("r must be positive")
    h = ctx.grid.h
    zero = np.zeros(ctx.grid.n)
    results = [AscentResult(zero, ctx.value(zero), True, 0)]
    for p in probes:
        p = np.asarray(p, dtype=float)
        if energy_inner(p, p, h) <= r * (1 + 1e-12):
            results.append(AscentResult(p, ctx.value(p), True, 0))
    shapes = start_profiles(ctx.grid, max(restarts - 1, 0), seed)
    t = ctx.grid.nodes
    near_zero = np.sin(np.pi * t) * (1e-3 * math.sqrt(r) / math.sqrt(energy_inner(np.sin(np.pi * t), np.sin(np.pi * t), h)))
    searched = [_ascend(ctx, u0, r, on_sphere=False) for u0 in [near_zero] + shapes]
    best = _best(results + searched)
    converged = all(res.converged for res in searched)
    return BallMaximum(GridFunction(ctx.grid, best.u), float(best.value), converged)


class SphereProfile:
    """Samples of g(tau) = max of J on ||u||**2 = tau for tau in ]0, r]."""

    def __init__(self, ctx: EnergyContext, r, restarts=DEFAULT_RESTARTS, seed=0):
        if not r > 0:
            raise DomainError("r must be positive")
        self.ctx = ctx
        self.r = float(r)
        self.restarts = restarts
        self.seed = seed
        self.taus = []
        self.values = []
        self.us = []
        self.converged = True
        self.beta = None
        self.grid_taus = None

    def build(self, n_radii=N_RADII, min_factor=RHO2_MIN_FACTOR):
        # from the outer sphere inwards, each maximiser warm-starts the next
        taus = self.r * np.geomspace(1.0, min_factor, n_radii)
        taus[0] = self.r
        warm = None
        for tau in taus:
            res = self.add(tau, warm=warm)
            warm = res.u
        self.grid_taus = np.sort(taus)
        return self

    def add(self, tau, warm=None, restarts=None):
        res = sphere_maximize(self.ctx, tau, self.restarts if restarts is None else restarts, self.seed, warm)
        self.taus.append(float(tau))
        self.values.append(float(res.value))
        self.us.append(res.u)
        self.converged &= res.converged
        return res

    def arrays(self):
        order = np.argsort(self.taus, kind="stable")
        return np.asarray(self.taus)[order], np.asarray(self.values)[order], order

    def quotient(self):
        """delta_r over the build grid and whether it is attained above its smallest radius."""
        grid = set(self.grid_taus.tolist())
        idx = [i for i, t in enumerate(self.taus) if t in grid]
        taus = np.array([self.taus[i] for i in idx])
        q = np.array([self.values[i] for i in idx]) / taus
        best = float(q.max())
        # ties (constant quotient) resolve to the largest radius
        top = np.flatnonzero(q >= best - 1e-12 * abs(best))
        at = taus[top].max()
        return best, bool(at > taus.min())

    def multiplier(self, i):
        """tau / <J'(u), u> for sample i: the lam with u = lam J'(u) at a critical point."""
        pairing = self.ctx.dual_pairing(self.us[i])
        return self.taus[i] / pairing if pairing > 0 else math.inf

    def _ratio(self, s, value_tau, tau):
        return (self.r - tau) / (s - value_tau)

    def eta_value(self, s):
        taus, vals, _ = self.arrays()
        denom = s - vals
        if np.any(denom <= 0) or s <= 0:
            raise DomainError(f"s = {s} does not exceed the largest sampled J value")
        return float(max(self.r / s, np.max((self.r - taus) / denom)))

    def refine(self, s, xatol_factor=1e-12):
        """Local scalar search for the best tau at this s; every probe joins the pool."""
        taus, vals, order = self.arrays()
        ratios = (self.r - taus) / (s - vals)
        i = int(np.argmax(ratios))
        if ratios[i] <= self.r / s:
            lo_t, hi_t = 0.0, taus[0]
        else:
            lo_t = taus[i - 1] if i > 0 else 0.0
            hi_t = taus[i + 1] if i + 1 < taus.size else self.r
        if hi_t - lo_t <= xatol_factor * self.r:
            return

        def negative_ratio(tau):
            if tau <= 0.0:
                return -self.r / s
            near = int(np.argmin(np.abs(np.asarray(self.taus) - tau)))
            res = self.add(tau, warm=self.us[near], restarts=REFINE_RESTARTS)
            return -(self.r - tau) / (s - res.value)

        start = max(lo_t, 1e-3 * hi_t)
        minimize_scalar(negative_ratio, bounds=(start, hi_t), method="bounded",
                        options={"xatol": xatol_factor * self.r, "maxiter": 60})


@dataclass
class VariationalEstimates:
    r: float
    beta_r: float
    delta_r: float
    delta_attained_interior: bool
    eta_samples: list = field(default_factory=list)
    interval: tuple | None = None
    empty_reason: str | None = None
    u_hat: GridFunction | None = None
    gap_at_u_hat: float | None = None
    converged: bool = True
    profile: SphereProfile | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "r": self.r,
            "beta_r": self.beta_r,
            "delta_r": self.delta_r,
            "beta_over_r": self.beta_r / self.r,
            "delta_attained_interior": self.delta_attained_interior,
            "interval": list(self.interval) if self.interval else "empty",
            "reason": self.empty_reason,
            "gap_at_u_hat": self.gap_at_u_hat,
            "u_hat_energy": None if self.u_hat is None else energy_inner(self.u_hat.values, self.u_hat.values, self.u_hat.grid.h),
            "u_hat_sup": None if self.u_hat is None else float(np.max(self.u_hat.values)),
            "n_eta_samples": len(self.eta_samples),
            "converged": self.converged,
        }


def _profile_for(ctx, r, profile, restarts, seed):
    if profile is None:
        profile = SphereProfile(ctx, r, restarts, seed).build()
    if profile.beta is None:
        ball = ball_max(ctx, r, restarts, seed, probes=profile.us)
        profile.beta = max(ball.beta, max(profile.values))
        profile.ball = ball
    return profile


def delta_r(ctx: EnergyContext, r, restarts=DEFAULT_RESTARTS, seed=0, profile=None):
    """(delta_r, attained_flag) from sphere maxima on a geometric grid of radii."""
    profile = profile if profile is not None else SphereProfile(ctx, r, restarts, seed).build()
    return profile.quotient()


def eta(ctx: EnergyContext, r, s, profile=None, restarts=DEFAULT_RESTARTS, seed=0, refine=True):
    """Best found value of eta(s); requires s > beta_r."""
    profile = _profile_for(ctx, r, profile, restarts, seed)
    if not s > profile.beta:
        raise DomainError(f"eta needs s > beta_r = {profile.beta!r}, got {s!r}")
    if refine:
        profile.refine(s)
    return profile.eta_value(s)


def _edges(profile, eps_edge, eps_abs, gap_tol):
    beta = profile.beta
    delta, _ = profile.quotient()
    r = profile.r
    if delta <= 0.0:
        raise EmptyInterval("delta_r = 0: J vanishes on the ball")
    if not beta / r < delta * (1.0 - gap_tol):
        raise EmptyInterval("beta_r/r == delta_r within tol")
    s_lo = beta * (1.0 + eps_edge) + eps_abs
    s_hi = r * delta * (1.0 - eps_edge)
    if not s_lo < s_hi:
        raise EmptyInterval("gap beta_r/r < delta_r narrower than the endpoint insets")
    return s_lo, s_hi


def lambda_interval(ctx: EnergyContext, r, profile=None, restarts=DEFAULT_RESTARTS, seed=0,
                    eps_edge=EPS_EDGE, eps_abs=EPS_ABS, gap_tol=GAP_TOL):
    """Inner approximation (lam_lo, lam_hi) of I = eta(]beta_r, r delta_r[) / 2."""
    profile = _profile_for(ctx, r, profile, restarts, seed)
    s_lo, s_hi = _edges(profile, eps_edge, eps_abs, gap_tol)
    profile.refine(s_lo)
    profile.refine(s_hi)
    lam_lo = 0.5 * profile.eta_value(s_hi)
    lam_hi = 0.5 * profile.eta_value(s_lo)
    if not lam_lo < lam_hi:
        raise EmptyInterval("sampled eta is not decreasing across the gap")
    return lam_lo, lam_hi


def estimate(ctx: EnergyContext, r, restarts=DEFAULT_RESTARTS, seed=0, n_radii=N_RADII,
             min_factor=RHO2_MIN_FACTOR, n_eta=N_ETA, eps_edge=EPS_EDGE, eps_abs=EPS_ABS,
             gap_tol=GAP_TOL):
    """All the ball/sphere quantities for one r, plus eta sampled across the gap."""
    profile = SphereProfile(ctx, r, restarts, seed).build(n_radii, min_factor)
    profile = _profile_for(ctx, r, profile, restarts, seed)
    delta, attained = profile.quotient()
    ball = profile.ball
    est = VariationalEstimates(
        r=float(r),
        beta_r=float(profile.beta),
        delta_r=float(delta),
        delta_attained_interior=attained,
        u_hat=ball.u_hat,
        gap_at_u_hat=float(pairing_gap(ctx, ball.u_hat)),
        converged=bool(ball.converged and profile.converged),
        profile=profile,
    )
    try:
        s_lo, s_hi = _edges(profile, eps_edge, eps_abs, gap_tol)
    except EmptyInterval as exc:
        est.empty_reason = exc.reason
        return est
    s_values = np.linspace(s_lo, s_hi, n_eta)
    for s in s_values:
        profile.refine(float(s))
    # evaluate only after every refinement so all samples share one pool
    etas = [profile.eta_value(float(s)) for s in s_values]
    est.eta_samples = [(float(s), e) for s, e in zip(s_values, etas)]
    lam_lo, lam_hi = 0.5 * etas[-1], 0.5 * etas[0]
    if lam_lo < lam_hi:
        est.interval = (lam_lo, lam_hi)
    else:
        est.empty_reason = "sampled eta is not decreasing across the gap"
    return est


# -- fixed point ----------------------------------------------------------------


@dataclass
class SolutionReport:
    lam: float
    u: GridFunction
    energy: float
    residual: float
    min_interior: float
    positivity_ok: bool
    energy_below_r: bool
    r: float
    iterations: int = 0
    oracle_delta: float | None = None
    oracle_energy: float | None = None
    fp_tol: float = FP_TOL

    @property
    def verdict(self):
        """pass when u solves the discrete problem, is positive and has energy below r."""
        ok = self.positivity_ok and self.energy_below_r and self.residual <= self.fp_tol
        return "pass" if ok else "fail"

    @property
    def oracle_ok(self):
        return None if self.oracle_delta is None else self.oracle_delta <= ORACLE_TOL

    def to_dict(self):
        return {
            "lambda": self.lam,
            "energy": self.energy,
            "residual": self.residual,
            "min_interior": self.min_interior,
            "positivity_ok": self.positivity_ok,
            "energy_below_r": self.energy_below_r,
            "iterations": self.iterations,
            "oracle_energy": self.oracle_energy,
            "oracle_delta": self.oracle_delta,
            "oracle_ok": self.oracle_ok,
            "verdict": self.verdict,
        }

    def csv_row(self):
        return [f"{self.lam:.17g}", f"{self.energy:.17g}", f"{self.residual:.17g}",
                f"{self.min_interior:.17g}", self.verdict]


SOLUTION_COLUMNS = ["lambda", "energy", "residual", "min_interior", "verdict"]


def fixed_point_solve(ctx: EnergyContext, lam, u0, r, theta=THETA, fp_tol=FP_TOL, max_iter=200_000,
                      pos_tol=0.0, zero_tol=None, theta_min=1.0 / 1024):
    """Damped iteration u <- (1 - theta) u + theta lam J'(u) until ||lam J'(u) - u||_inf <= fp_tol.

    theta halves whenever the residual grows.  Collapse onto zero raises
    NoNontrivialSolution.
    """
    if not lam > 0:
        raise DomainError("lam must be positive")
    h = ctx.grid.h
    zero_tol = 1e-7 * math.sqrt(r) if zero_tol is None else zero_tol
    u = np.array(u0.values if isinstance(u0, GridFunction) else u0, dtype=float)
    prev = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        T = lam * ctx.gradient(u)
        res = float(np.max(np.abs(T - u)))
        if res <= fp_tol:
            break
        if res > prev:
            theta = max(theta * 0.5, theta_min)
        prev = res
        u = (1.0 - theta) * u + theta * T
        nsq = energy_inner(u, u, h)
        if nsq > 10.0 * r:
            raise Diverged(f"energy {nsq:.3g} exceeds 10 r at iteration {it}", when=it)
        if math.sqrt(nsq) < zero_tol:
            raise NoNontrivialSolution(f"iteration collapsed to zero at lam = {lam}")
    else:
        report = _report(ctx, lam, u, r, it, pos_tol, fp_tol)
        raise NotConverged(f"residual {report.residual:.3g} after {max_iter} iterations", best=report)
    if math.sqrt(energy_inner(u, u, h)) < zero_tol:
        raise NoNontrivialSolution(f"converged to the zero solution at lam = {lam}")
    return _report(ctx, lam, u, r, it, pos_tol, fp_tol)


def _report(ctx, lam, u, r, it, pos_tol, fp_tol):
    h = ctx.grid.h
    residual = float(np.max(np.abs(lam * ctx.gradient(u) - u)))
    energy = energy_inner(u, u, h)
    mn = float(np.min(u))
    return SolutionReport(
        lam=float(lam),
        u=GridFunction(ctx.grid, u),
        energy=float(energy),
        residual=residual,
        min_interior=mn,
        positivity_ok=mn > pos_tol,
        energy_below_r=energy < r,
        r=float(r),
        iterations=it,
        fp_tol=fp_tol,
    )


def _better(a, b):
    """Tie-break: smaller residual first, then smaller energy."""
    if b is None:
        return a
    if (a.residual, a.energy) < (b.residual, b.energy):
        return a
    return b


def solve_at(ctx, lam, r, profile, candidates=2, **kw):
    """Fixed-point solve from the profile maximisers whose multipliers are closest to lam."""
    mults = np.array([profile.multiplier(i) for i in range(len(profile.taus))])
    order = np.argsort(np.abs(mults - lam), kind="stable")
    best = None
    errors = []
    for i in order[:candidates]:
        try:
            rep = fixed_point_solve(ctx, lam, profile.us[i], r, **kw)
        except PosBVPError as exc:
            errors.append(exc)
            continue
        best = _better(rep, best)
    if best is None:
        raise errors[0]
    return best


# -- characterisation -----------------------------------------------------------


@dataclass
class CharacterizationReport:
    hypotheses: object
    estimates: VariationalEstimates
    solutions: list
    failures: list
    verdict: str

    @property
    def oracle_agreement(self):
        flags = [s.oracle_ok for s in self.solutions if s.oracle_ok is not None]
        return all(flags) if flags else None

    def to_dict(self):
        return {
            "hypotheses": self.hypotheses.to_dict(),
            "estimates": self.estimates.to_dict(),
            "solutions": [s.to_dict() for s in self.solutions],
            "failures": self.failures,
            "oracle_agreement": self.oracle_agreement,
            "verdict": self.verdict,
        }


def sample_lambdas(interval, k):
    lo, hi = interval
    return [lo + j * (hi - lo) / (k + 1) for j in range(1, k + 1)]


def characterize(ctx: EnergyContext, r, k=5, a=None, phi_tol=DEFAULT_PHI_TOL, oracle=True,
                 n_steps=10_000, fp_tol=FP_TOL, estimate_kw=None, skip_hypotheses=False):
    """Run both sides of the equivalence for one r and bundle the evidence."""
    hyp = hypothesis_report(ctx.f, a, phi_tol)
    if not skip_hypotheses:
        a_used = a if a is not None else hyp.a_certified
        if a_used <= 0 or not check_nonincreasing(ctx.f, a_used, phi_tol):
            raise HypothesisViolation(f"F(xi)/xi^2 is not non-increasing on ]0, {a_used}]")
        if r > a_used ** 2:
            raise HypothesisViolation(f"r = {r} exceeds a^2 = {a_used ** 2}")
    est = estimate(ctx, r, **(estimate_kw or {}))
    solutions, failures = [], []
    if est.interval is not None:
        prob = ShootingProblem(ctx.f, ctx.alpha, n_steps) if oracle else None
        for lam in sample_lambdas(est.interval, k):
            try:
                rep = solve_at(ctx, lam, r, est.profile, fp_tol=fp_tol)
            except PosBVPError as exc:
                failures.append({"lambda": lam, "error": type(exc).__name__, "message": str(exc)})
                continue
            if oracle:
                try:
                    shot = shoot_auto(ctx.f, ctx.alpha, lam, r, guess=rep.u.values[0] / ctx.grid.h, problem=prob)
                except PosBVPError as exc:
                    shot = None
                    failures.append({"lambda": lam, "error": "oracle:" + type(exc).__name__, "message": str(exc)})
                if shot is not None:
                    rep.oracle_energy = shot.energy
                    rep.oracle_delta = abs(rep.energy - shot.energy) / shot.energy
            solutions.append(rep)
    cond_i = hyp.nonconstant_on_all_prefixes
    if cond_i and est.interval is not None and solutions and not failures \
            and all(s.verdict == "pass" for s in solutions):
        verdict = "(i)=>(ii) verified"
    elif not cond_i and est.interval is None:
        verdict = "(not i)=>empty interval observed"
    else:
        verdict = "inconsistent"
    return CharacterizationReport(hyp, est, solutions, failures, verdict)
