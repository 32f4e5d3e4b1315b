"""Nonlinearities f, weights alpha, the primitive F and the gap 2F - xi f.

The ratio F(xi)/xi**2 drives everything: it is non-increasing on ]0, a]
exactly when phi(xi) = 2F(xi) - xi f(xi) >= 0 there, because

    d/dxi [F(xi)/xi**2] = -phi(xi) / xi**3.

All evaluators are vectorised over numpy arrays and extend f and F by zero
on the negative half-line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, EvaluationError

FAMILIES = ("linear", "logistic", "cubic_cap", "power", "zero", "tabulated")
WEIGHT_FAMILIES = ("constant", "tabulated")

DEFAULT_QUAD_TOL = 1e-10
DEFAULT_PHI_TOL = 1e-9
# geometric sampling of ]0, a] used by the hypothesis checks
SAMPLES_PER_DECADE = 512
XI_FLOOR = 1e-8


def _logistic_primitive(x):
    # x - log1p(x) loses all digits near 0; use the alternating series there
    out = x - np.log1p(x)
    small = x < 1e-2
    if np.any(small):
        xs = x[small]
        series = np.zeros_like(xs)
        for k in range(9, 1, -1):
            series = xs * ((-1) ** k / k + series)
        out[small] = xs * series
    return out


@dataclass(frozen=True)
class Nonlinearity:
    """A continuous f: [0, xi_max] -> [0, inf) with f(0) = 0.

    ``params`` holds ``(c,)`` for linear (f = 2 c xi), ``(p,)`` for power
    (f = xi**p), and ``(xs, ys)`` sample tuples for tabulated data.
    """

    family: str
    params: tuple = ()
    xi_max: float = 100.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown nonlinearity family {self.family!r}")
        if not (self.xi_max > 0 and math.isfinite(self.xi_max)):
            raise ValueError("xi_max must be a positive finite number")
        if self.family == "linear":
            (c,) = self.params
            if not c > 0:
                raise ValueError("linear family needs c > 0")
        elif self.family == "power":
            (p,) = self.params
            if not p > 0:
                raise ValueError("power family needs p > 0")
        elif self.family == "tabulated":
            xs, ys = (np.asarray(v, dtype=float) for v in self.params)
            if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
                raise ValueError("tabulated f needs two equal-length sample sequences")
            if not np.all(np.diff(xs) > 0):
                raise ValueError("tabulated abscissae must be strictly increasing")
            if xs[0] != 0.0 or ys[0] != 0.0:
                raise ValueError("tabulated f must start at (0, 0)")
            if np.any(ys < 0) or not np.all(np.isfinite(ys)):
                raise ValueError("tabulated ordinates must be finite and nonnegative")
            if self.xi_max > xs[-1]:
                object.__setattr__(self, "xi_max", float(xs[-1]))

    # -- constructors -------------------------------------------------------

    @classmethod
    def linear(cls, c=1.0, xi_max=100.0):
        return cls("linear", (float(c),), xi_max)

    @classmethod
    def logistic(cls, xi_max=100.0):
        return cls("logistic", (), xi_max)

    @classmethod
    def cubic_cap(cls, xi_max=10.0):
        return cls("cubic_cap", (), xi_max)

    @classmethod
    def power(cls, p, xi_max=100.0):
        return cls("power", (float(p),), xi_max)

    @classmethod
    def zero(cls, xi_max=100.0):
        return cls("zero", (), xi_max)

    @classmethod
    def tabulated(cls, xs, ys, xi_max=None):
        xs = tuple(float(v) for v in xs)
        ys = tuple(float(v) for v in ys)
        return cls("tabulated", (xs, ys), xs[-1] if xi_max is None else xi_max)

    # -- evaluation ---------------------------------------------------------

    @cached_property
    def _pchip(self):
        xs, ys = self.params
        return PchipInterpolator(np.asarray(xs), np.asarray(ys), extrapolate=False)

    @cached_property
    def _pchip_antiderivative(self):
        return self._pchip.antiderivative()

    def __call__(self, xi):
        x = np.asarray(xi, dtype=float)
        xp = np.maximum(x, 0.0)
        fam = self.family
        if fam == "linear":
            out = 2.0 * self.params[0] * xp
        elif fam == "logistic":
            out = xp / (1.0 + xp)
        elif fam == "cubic_cap":
            out = np.where(xp <= 1.0, xp - xp * xp, 0.0)
        elif fam == "power":
            out = xp ** self.params[0]
        elif fam == "zero":
            out = np.zeros_like(xp)
        else:
            # beyond the table f is held at its last value (outside the certified range)
            out = np.maximum(self._pchip(np.minimum(xp, self.xi_max)), 0.0)
        out = np.where(x > 0, out, 0.0)
        return out if out.ndim else float(out)

    def primitive_exact(self, xi):
        """Closed-form F(xi) (exact piecewise antiderivative for tabulated f)."""
        x = np.asarray(xi, dtype=float)
        xp = np.atleast_1d(np.maximum(x, 0.0)).astype(float)
        fam = self.family
        if fam == "linear":
            out = self.params[0] * xp * xp
        elif fam == "logistic":
            out = _logistic_primitive(xp)
        elif fam == "cubic_cap":
            xc = np.minimum(xp, 1.0)
            out = xc * xc / 2.0 - xc ** 3 / 3.0
        elif fam == "power":
            p = self.params[0]
            out = xp ** (p + 1.0) / (p + 1.0)
        elif fam == "zero":
            out = np.zeros_like(xp)
        else:
            top = self.xi_max
            inside = np.minimum(xp, top)
            out = self._pchip_antiderivative(inside)
            over = xp > top
            if np.any(over):
                out = np.where(over, out + float(self(top)) * (xp - top), out)
        out = np.where(np.atleast_1d(x) > 0, out, 0.0)
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def derivatives_at_zero(self, order):
        """Right derivatives f'(0), ..., f^(order)(0) and whether the list is exhaustive.

        Returns ``(None, False)`` when the family has no closed form.
        """
        fam = self.family
        ks = range(1, order + 1)
        if fam == "linear":
            return [2.0 * self.params[0] if k == 1 else 0.0 for k in ks], True
        if fam == "logistic":
            # xi/(1+xi) = sum (-1)^(k+1) xi^k
            return [(-1.0) ** (k + 1) * math.factorial(k) for k in ks], False
        if fam == "cubic_cap":
            return [{1: 1.0, 2: -2.0}.get(k, 0.0) for k in ks], True
        if fam == "zero":
            return [0.0 for _ in ks], True
        if fam == "power":
            p = self.params[0]
            if p != int(p):
                return None, False
            p = int(p)
            return [float(math.factorial(p)) if k == p else 0.0 for k in ks], True
        return None, False

    def check_domain(self, values, what="value"):
        values = np.asarray(values)
        if values.size and np.max(values) > self.xi_max:
            i = int(np.argmax(values))
            raise DomainError(
                f"{what} {i} = {values.flat[i]!r} exceeds xi_max = {self.xi_max} "
                f"for the {self.family} nonlinearity"
            )

    def describe(self):
        if self.family == "tabulated":
            xs, ys = self.params
            return {"family": "tabulated", "xi": list(xs), "f": list(ys), "xi_max": self.xi_max}
        return {"family": self.family, "params": list(self.params), "xi_max": self.xi_max}


@dataclass(frozen=True)
class Weight:
    """Strictly positive continuous coefficient alpha on [0, 1]."""

    family: str = "constant"
    values: tuple = (1.0,)

    def __post_init__(self):
        if self.family not in WEIGHT_FAMILIES:
            raise ValueError(f"unknown weight family {self.family!r}")
        if self.family == "constant":
            (v,) = self.values
            if not (v > 0 and math.isfinite(v)):
                raise ValueError("constant weight must be positive and finite")
        else:
            ts, vs = (np.asarray(v, dtype=float) for v in self.values)
            if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2:
                raise ValueError("tabulated weight needs two equal-length sample sequences")
            if ts[0] != 0.0 or ts[-1] != 1.0 or not np.all(np.diff(ts) > 0):
                raise ValueError("tabulated weight abscissae must increase from 0 to 1")
            if not np.all(vs > 0) or not np.all(np.isfinite(vs)):
                raise ValueError("weight samples must be positive and finite")

    @classmethod
    def constant(cls, v=1.0):
        return cls("constant", (float(v),))

    @classmethod
    def tabulated(cls, ts, vs):
        return cls("tabulated", (tuple(map(float, ts)), tuple(map(float, vs))))

    @cached_property
    def _pchip(self):
        ts, vs = self.values
        return PchipInterpolator(np.asarray(ts), np.asarray(vs))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "constant":
            out = np.full(t.shape, self.values[0])
        else:
            # pchip never leaves the range of neighbouring samples, so stays positive
            out = self._pchip(np.clip(t, 0.0, 1.0))
        return out if out.ndim else float(out)

    @property
    def alpha_min(self):
        if self.family == "constant":
            return self.values[0]
        return float(min(self.values[1]))

    def describe(self):
        if self.family == "constant":
            return {"family": "constant", "values": list(self.values)}
        ts, vs = self.values
        return {"family": "tabulated", "t": list(ts), "alpha": list(vs)}


# -- primitive and gap --------------------------------------------------------


def _adaptive_simpson(func, a, b, tol, max_depth=50, panels=16):
    """Adaptive Simpson started from ``panels`` equal pieces.

    The initial split keeps a bump of f that falls between the first few
    Simpson nodes (a cut-off nonlinearity on a long range) from being
    mistaken for zero.
    """
    def sample(x):
        y = float(func(x))
        if not math.isfinite(y):
            raise EvaluationError(f"non-finite f value {y!r} at xi = {x!r}", abscissa=x)
        return y

    edges = np.linspace(a, b, panels + 1)
    fe = [sample(x) for x in edges]
    total = 0.0
    stack = []
    for i in range(panels):
        lo, hi = float(edges[i]), float(edges[i + 1])
        m = 0.5 * (lo + hi)
        fm = sample(m)
        whole = (hi - lo) * (fe[i] + 4.0 * fm + fe[i + 1]) / 6.0
        stack.append((lo, hi, fe[i], fm, fe[i + 1], whole, tol / panels, 0))
    while stack:
        a, b, fa, fm, fb, whole, tol, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = sample(lm), sample(rm)
        left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
        right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * tol:
            total += left + right + delta / 15.0
        else:
            stack.append((a, m, fa, flm, fm, left, tol / 2.0, depth + 1))
            stack.append((m, b, fm, frm, fb, right, tol / 2.0, depth + 1))
    return total


def primitive(f: Nonlinearity, xi: float, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """F(xi) = integral of f over [0, xi] by adaptive Simpson quadrature."""
    xi = float(xi)
    if xi <= 0.0:
        return 0.0
    if xi > f.xi_max:
        raise DomainError(f"xi = {xi} exceeds xi_max = {f.xi_max}")
    return _adaptive_simpson(f, 0.0, xi, quad_tol)


def gap_phi(f: Nonlinearity, xi: float, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """phi(xi) = 2 F(xi) - xi f(xi), with F from adaptive quadrature."""
    xi = float(xi)
    if xi <= 0.0:
        return 0.0
    return 2.0 * primitive(f, xi, quad_tol) - xi * float(f(xi))


@dataclass(frozen=True)
class Primitive:
    """Vectorised evaluators for F and phi attached to one nonlinearity.

    ``method="exact"`` uses the closed-form antiderivative; ``"quadrature"``
    integrates each sample with adaptive Simpson (slow, used as a check).
    """

    f: Nonlinearity
    method: str = "exact"
    quad_tol: float = DEFAULT_QUAD_TOL

    def F(self, xi):
        if self.method == "exact":
            return self.f.primitive_exact(xi)
        x = np.asarray(xi, dtype=float)
        out = np.array([primitive(self.f, v, self.quad_tol) for v in x.ravel()])
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def phi(self, xi):
        x = np.asarray(xi, dtype=float)
        out = 2.0 * np.asarray(self.F(x)) - np.where(x > 0, x, 0.0) * np.asarray(self.f(x))
        return out if np.ndim(out) else float(out)


# -- hypothesis checks --------------------------------------------------------


def sample_grid(upper, per_decade=SAMPLES_PER_DECADE, floor=XI_FLOOR):
    """Geometric sample of ]0, upper] from ``floor`` up, always ending at ``upper``."""
    if upper <= floor:
        return np.array([upper])
    decades = math.log10(upper / floor)
    count = max(int(math.ceil(decades * per_decade)) + 1, 2)
    xs = np.geomspace(floor, upper, count)
    xs[-1] = upper
    return xs


def check_nonincreasing(f: Nonlinearity, a: float, tol: float = DEFAULT_PHI_TOL) -> bool:
    """True iff F(xi)/xi**2 is (numerically) non-increasing on ]0, a]."""
    if not a > 0:
        raise DomainError("a must be positive")
    if a > f.xi_max:
        raise DomainError(f"a = {a} exceeds xi_max = {f.xi_max}")
    xs = sample_grid(a)
    return bool(np.all(Primitive(f).phi(xs) >= -tol))


def check_not_constant(f: Nonlinearity, b: float, tol: float = DEFAULT_PHI_TOL) -> bool:
    """True iff F(xi)/xi**2 is (numerically) not constant on ]0, b].

    Two witnesses are accepted: a ratio differing from its value at b by more
    than tol, or a scaled gap |phi(xi)| > tol * xi**2.  The second one stays
    meaningful on very short prefixes where the ratio barely moves.
    """
    if not b > 0:
        raise DomainError("b must be positive")
    if b > f.xi_max:
        raise DomainError(f"b = {b} exceeds xi_max = {f.xi_max}")
    return _first_nonconstant_witness(f, sample_grid(b), tol) is not None


def _first_nonconstant_witness(f, xs, tol):
    prim = Primitive(f)
    F = prim.F(xs)
    ratio = F / (xs * xs)
    phi = 2.0 * F - xs * f(xs)
    hits = np.abs(phi) > tol * xs * xs
    if np.any(hits):
        return float(xs[np.argmax(hits)])
    far = np.abs(ratio - ratio[-1]) > tol
    if np.any(far):
        return float(xs[np.argmax(far)])
    return None


@dataclass
class HypothesisReport:
    a_requested: float | None
    nonincreasing: bool | None
    a_certified: float
    nonconstant_on_all_prefixes: bool
    witness: float | None
    strictly_decreasing: bool
    tol: float = DEFAULT_PHI_TOL

    def to_dict(self):
        return {
            "a_requested": self.a_requested,
            "nonincreasing": self.nonincreasing,
            "a_certified": self.a_certified,
            "not_constant": self.nonconstant_on_all_prefixes,
            "witness": self.witness,
            "strictly_decreasing": self.strictly_decreasing,
            "tol": self.tol,
        }


def hypothesis_report(f: Nonlinearity, a: float | None = None, tol: float = DEFAULT_PHI_TOL):
    """Decide both hypotheses on the sample grid up to ``xi_max``.

    ``a_certified`` is the largest sample below which phi >= -tol holds; the
    non-constancy verdict asks for a witness inside every sampled prefix,
    which on a grid means the first sample must already be one.
    """
    xs = sample_grid(f.xi_max)
    prim = Primitive(f)
    F = prim.F(xs)
    phi = 2.0 * F - xs * f(xs)
    bad = phi < -tol
    if not np.any(bad):
        a_cert = float(xs[-1])
    else:
        first = int(np.argmax(bad))
        a_cert = float(xs[first - 1]) if first > 0 else 0.0
    scaled = np.abs(phi) > tol * xs * xs
    witness = _first_nonconstant_witness(f, xs, tol)
    nonconst_all = bool(scaled[0]) if xs.size else False
    upto = xs <= (a if a is not None else a_cert)
    strict = bool(np.all(phi[upto] > tol * xs[upto] ** 3)) if np.any(upto) else False
    nonincreasing = check_nonincreasing(f, a, tol) if a is not None else None
    return HypothesisReport(
        a_requested=a,
        nonincreasing=nonincreasing,
        a_certified=a_cert,
        nonconstant_on_all_prefixes=nonconst_all,
        witness=witness if nonconst_all else None,
        strictly_decreasing=strict,
        tol=tol,
    )


@dataclass(frozen=True)
class TaylorCertificate:
    """Outcome of the derivative test: ``status`` is certified, none or undetermined."""

    k: int | None
    status: str


def certify_odd_taylor(derivs: Sequence[float] | None, exhaustive: bool = False) -> TaylorCertificate:
    """Smallest k with f^(2k)(0) < 0 and f^(2m)(0) = 0 for m < k.

    ``derivs[j]`` is f^(j+1)(0).  The test needs f^(2k+1)(0) to exist, so a
    list ending before index 2k+1 cannot certify k.  Running out of supplied
    derivatives while every even one vanished is "undetermined" unless the
    caller states the list is exhaustive (polynomial f).
    """
    if derivs is None:
        return TaylorCertificate(None, "undetermined")
    derivs = list(derivs)
    k = 1
    while 2 * k <= len(derivs):
        even = derivs[2 * k - 1]
        if even < 0:
            if len(derivs) >= 2 * k + 1:
                return TaylorCertificate(k, "certified")
            return TaylorCertificate(None, "undetermined")
        if even > 0:
            return TaylorCertificate(None, "none")
        k += 1
    return TaylorCertificate(None, "none" if exhaustive else "undetermined")


def taylor_certificate(f: Nonlinearity, order: int = 9) -> TaylorCertificate:
    derivs, exhaustive = f.derivatives_at_zero(order)
    return certify_odd_taylor(derivs, exhaustive)


# -- parsing ------------------------------------------------------------------


def _read_two_columns(path):
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.split(",")]
        skip = 0
    except ValueError:
        skip = 1  # header row
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#", skiprows=skip)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns")
    return data[:, 0], data[:, 1]


def parse_nonlinearity(value, xi_max: float | None = None) -> Nonlinearity:
    """Build f from ``FAMILY[:PARAMS]`` text or a mapping from a config file."""
    if isinstance(value, Nonlinearity):
        return value
    if isinstance(value, dict):
        fam = value.get("family")
        xi_max = value.get("xi_max", xi_max)
        if fam == "tabulated":
            f = Nonlinearity.tabulated(value["xi"], value["f"], xi_max)
            return f
        params = tuple(float(p) for p in value.get("params", ()))
    else:
        fam, _, rest = str(value).partition(":")
        fam = fam.strip()
        if fam == "tabulated":
            xs, ys = _read_two_columns(rest)
            return Nonlinearity.tabulated(xs, ys, xi_max)
        params = tuple(float(p) for p in rest.split(",") if p.strip())
    kwargs = {} if xi_max is None else {"xi_max": float(xi_max)}
    if fam == "linear":
        return Nonlinearity.linear(*(params or (1.0,)), **kwargs)
    if fam in ("logistic", "cubic_cap", "zero"):
        if params:
            raise ValueError(f"{fam} takes no parameters")
        return getattr(Nonlinearity, fam)(**kwargs)
    if fam == "power":
        return Nonlinearity.power(*params, **kwargs)
    raise ValueError(f"unknown nonlinearity family {fam!r}")


def parse_weight(value) -> Weight:
    if isinstance(value, Weight):
        return value
    if isinstance(value, dict):
        if value.get("family") == "tabulated":
            return Weight.tabulated(value["t"], value["alpha"])
        return Weight.constant(*value.get("values", (1.0,)))
    fam, _, rest = str(value).partition(":")
    fam = fam.strip()
    if fam == "constant":
        return Weight.constant(float(rest) if rest.strip() else 1.0)
    if fam == "tabulated":
        return Weight.tabulated(*_read_two_columns(rest))
    raise ValueError(f"unknown weight family {fam!r}")
