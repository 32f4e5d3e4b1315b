"""Compiled RK4 sweeps for u'' = -lam * alpha(t) * f(u), u(0) = 0, u'(0) = s.

The nonlinearity is passed as (kind, params, breakpoints, coefficients) so a
single compiled loop covers every family; ``kernel_spec`` builds that tuple.
Kind ``SIGNED_LINEAR`` is the plain linear map u -> p0 * u without the zero
extension, used for the Sturm-Liouville scan where eigenfunctions change sign.
"""

import numba
import numpy as np

ZERO, LINEAR, LOGISTIC, CUBIC_CAP, POWER, TABULATED, SIGNED_LINEAR = range(7)

_KIND = {
    "zero": ZERO,
    "linear": LINEAR,
    "logistic": LOGISTIC,
    "cubic_cap": CUBIC_CAP,
    "power": POWER,
    "tabulated": TABULATED,
}

BLOWUP = 1e150


def kernel_spec(f):
    """Translate a Nonlinearity into the flat arrays the compiled loop reads."""
    kind = _KIND[f.family]
    if kind == TABULATED:
        pp = f._pchip
        return kind, np.zeros(1), np.ascontiguousarray(pp.x), np.ascontiguousarray(pp.c)
    params = np.array(f.params if f.params else (0.0,), dtype=float)
    return kind, params, np.zeros(2), np.zeros((4, 1))


def signed_linear_spec(coefficient):
    return SIGNED_LINEAR, np.array([float(coefficient)]), np.zeros(2), np.zeros((4, 1))


@numba.njit(cache=True)
def _fval(kind, p, tx, tc, u):
    if kind == SIGNED_LINEAR:
        return p[0] * u
    if u <= 0.0:
        return 0.0
    if kind == LINEAR:
        return 2.0 * p[0] * u
    if kind == LOGISTIC:
        return u / (1.0 + u)
    if kind == CUBIC_CAP:
        if u <= 1.0:
            return u - u * u
        return 0.0
    if kind == POWER:
        return u ** p[0]
    if kind == TABULATED:
        x = min(u, tx[-1])
        m = tc.shape[1]
        i = np.searchsorted(tx, x, side="right") - 1
        if i > m - 1:
            i = m - 1
        d = x - tx[i]
        v = ((tc[0, i] * d + tc[1, i]) * d + tc[2, i]) * d + tc[3, i]
        return max(v, 0.0)
    return 0.0


@numba.njit(cache=True)
def rk4_batch(kind, p, tx, tc, a_node, a_mid, lam, s, n_steps):
    """Integrate one trajectory per (lam[j], s[j]) pair without storing paths.

    Returns end value, end slope, Simpson energy of u'^2, interior minimum,
    overall maximum of u and the first step index at which |u| or |u'|
    exceeded the blow-up bound (-1 if never).
    """
    m = lam.shape[0]
    u_end = np.empty(m)
    v_end = np.empty(m)
    energy = np.empty(m)
    u_min = np.empty(m)
    u_max = np.empty(m)
    blow = np.full(m, -1, dtype=np.int64)
    dt = 1.0 / n_steps
    for j in range(m):
        L = lam[j]
        u = 0.0
        v = s[j]
        acc = v * v
        lo = np.inf
        hi = 0.0
        for i in range(n_steps):
            c0 = -L * a_node[i]
            c1 = -L * a_mid[i]
            c2 = -L * a_node[i + 1]
            k1u = v
            k1v = c0 * _fval(kind, p, tx, tc, u)
            k2u = v + 0.5 * dt * k1v
            k2v = c1 * _fval(kind, p, tx, tc, u + 0.5 * dt * k1u)
            k3u = v + 0.5 * dt * k2v
            k3v = c1 * _fval(kind, p, tx, tc, u + 0.5 * dt * k2u)
            k4u = v + dt * k3v
            k4v = c2 * _fval(kind, p, tx, tc, u + dt * k3u)
            u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            if not (abs(u) < BLOWUP and abs(v) < BLOWUP):
                blow[j] = i + 1
                break
            if i + 1 < n_steps:
                acc += (4.0 if (i + 1) % 2 == 1 else 2.0) * v * v
                if u < lo:
                    lo = u
            else:
                acc += v * v
            if u > hi:
                hi = u
        u_end[j] = u
        v_end[j] = v
        energy[j] = acc * dt / 3.0
        u_min[j] = lo
        u_max[j] = hi
    return u_end, v_end, energy, u_min, u_max, blow


@numba.njit(cache=True)
def rk4_path(kind, p, tx, tc, a_node, a_mid, lam, s, n_steps):
    """Single trajectory with every sample; stops early on blow-up."""
    dt = 1.0 / n_steps
    us = np.zeros(n_steps + 1)
    vs = np.zeros(n_steps + 1)
    vs[0] = s
    u = 0.0
    v = s
    last = n_steps
    for i in range(n_steps):
        c0 = -lam * a_node[i]
        c1 = -lam * a_mid[i]
        c2 = -lam * a_node[i + 1]
        k1u = v
        k1v = c0 * _fval(kind, p, tx, tc, u)
        k2u = v + 0.5 * dt * k1v
        k2v = c1 * _fval(kind, p, tx, tc, u + 0.5 * dt * k1u)
        k3u = v + 0.5 * dt * k2v
        k3v = c1 * _fval(kind, p, tx, tc, u + 0.5 * dt * k2u)
        k4u = v + dt * k3v
        k4v = c2 * _fval(kind, p, tx, tc, u + dt * k3u)
        u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        us[i + 1] = u
        vs[i + 1] = v
        if not (abs(u) < BLOWUP and abs(v) < BLOWUP):
            last = i + 1
            break
    return us, vs, last


@numba.njit(cache=True)
def f_values(kind, p, tx, tc, u):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = _fval(kind, p, tx, tc, u[i])
    return out
