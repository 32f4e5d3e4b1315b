import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from posbvp.discrete_space import (
    Grid,
    GridFunction,
    embedding_ratio,
    inner,
    lumped_integral,
    norm_sq,
    read_csv,
    second_difference,
    solve_dirichlet,
    sup_abs,
    write_csv,
)
from posbvp.errors import GridMismatch

N = 511
G = Grid(N)
finite = st.one_of(st.just(0.0), st.floats(1e-100, 1e3), st.floats(-1e3, -1e-100))


def values(n=N):
    return arrays(np.float64, n, elements=finite)


def test_grid():
    assert G.h * (N + 1) == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(G.nodes) > 0)
    assert 0 < G.nodes[0] and G.nodes[-1] < 1
    assert G.nodes[255] == 0.5
    with pytest.raises(ValueError):
        Grid(0)


def test_grid_function_validation():
    with pytest.raises(ValueError):
        GridFunction(G, np.zeros(N - 1))
    with pytest.raises(ValueError):
        GridFunction(G, np.full(N, np.nan))
    u = GridFunction.tent(G)
    with pytest.raises(ValueError):
        u.values[0] = 1.0
    assert u.padded()[0] == 0.0 and u.padded()[-1] == 0.0 and u.padded().size == N + 2


def test_inner_examples():
    tent, sine, zero = GridFunction.tent(G), GridFunction.sine(G), GridFunction.zeros(G)
    assert inner(tent, tent) == pytest.approx(1.0, abs=1e-12)
    assert inner(sine, zero) == 0.0
    # sum over the n+1 cells of 4 sin^2(pi h/2) cos^2(pi (i+1/2) h), divided by h
    exact = 2.0 * math.sin(math.pi * G.h / 2) ** 2 / G.h ** 2
    assert norm_sq(sine) == pytest.approx(exact, rel=1e-12)
    assert norm_sq(sine) == pytest.approx(math.pi ** 2 / 2, abs=1e-4)
    assert norm_sq(zero) == 0.0


def test_sup_and_embedding_examples():
    tent, sine = GridFunction.tent(G), GridFunction.sine(G)
    assert sup_abs(tent) == 0.5
    assert sup_abs(GridFunction.zeros(G)) == 0.0
    assert sup_abs(sine) == 1.0
    assert embedding_ratio(tent) == pytest.approx(0.5, abs=1e-12)
    assert embedding_ratio(sine) == pytest.approx(1 / math.sqrt(math.pi ** 2 / 2), abs=1e-5)
    for n in (1, 2, 7, 100):
        g = Grid(n)
        spike = np.zeros(n)
        spike[n // 2] = 1.0
        r = embedding_ratio(GridFunction(g, spike))
        assert r == pytest.approx(math.sqrt(g.h / 2), rel=1e-12) and r <= 0.5
    with pytest.raises(ValueError):
        embedding_ratio(GridFunction.zeros(G))


def test_grid_mismatch():
    with pytest.raises(GridMismatch):
        inner(GridFunction.tent(G), GridFunction.tent(Grid(63)))
    with pytest.raises(GridMismatch):
        GridFunction.tent(G) + GridFunction.tent(Grid(63))


@settings(max_examples=100, deadline=None)
@given(a=values(), b=values(), c=values(), s=finite)
def test_inner_symmetric_bilinear_cauchy_schwarz(a, b, c, s):
    u, v, w = (GridFunction(G, x) for x in (a, b, c))
    scale = 1 + norm_sq(u) + norm_sq(v) + norm_sq(w)
    assert inner(u, v) == pytest.approx(inner(v, u), abs=1e-12 * scale)
    lhs = inner(u * s + v, w)
    rhs = s * inner(u, w) + inner(v, w)
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(s)) * scale)
    assert inner(u, v) ** 2 <= norm_sq(u) * norm_sq(v) * (1 + 1e-12) + 1e-300
    assert norm_sq(u) >= 0


@settings(max_examples=200, deadline=None)
@given(a=values(), n=st.integers(1, 600))
def test_embedding_bound(a, n):
    u = GridFunction(Grid(n), np.resize(a, n))
    if np.any(u.values != 0):
        assert embedding_ratio(u) <= 0.5 + 1e-12


@settings(max_examples=100, deadline=None)
@given(a=values())
def test_solve_inverts_second_difference(a):
    w = solve_dirichlet(a, G)
    back = second_difference(w)
    assert np.max(np.abs(back - a)) <= 1e-10 * max(np.max(np.abs(a)), 1e-300)


@settings(max_examples=100, deadline=None)
@given(a=values(), b=values())
def test_solve_is_riesz_map(a, b):
    w = solve_dirichlet(a, G)
    v = GridFunction(G, b)
    rhs = G.h * float(a @ b)
    assert inner(w, v) == pytest.approx(rhs, abs=1e-9 * (1 + np.abs(a).max() * np.abs(b).max()))


@settings(max_examples=100, deadline=None)
@given(a=values())
def test_poincare(a):
    u = GridFunction(G, a)
    # the discrete first eigenvalue is 4 sin^2(pi h/2)/h^2 < pi^2
    lam1 = 4 * math.sin(math.pi * G.h / 2) ** 2 / G.h ** 2
    assert lumped_integral(u.values ** 2, G.h) <= norm_sq(u) / lam1 * (1 + 1e-10) + 1e-300
    assert lam1 == pytest.approx(math.pi ** 2, rel=1e-5)


def test_solve_examples():
    w = solve_dirichlet(np.ones(N), G)
    t = G.nodes
    np.testing.assert_allclose(w.values, t * (1 - t) / 2, atol=1e-13)
    assert np.argmax(w.values) == 255 and w.values[255] == pytest.approx(0.125, abs=1e-12)
    assert np.all(solve_dirichlet(np.zeros(N), G).values == 0)
    s = solve_dirichlet(math.pi ** 2 * np.sin(math.pi * t), G)
    assert np.max(np.abs(s.values - np.sin(math.pi * t))) < 1e-5
    with pytest.raises(ValueError):
        solve_dirichlet(np.ones(N))
    assert solve_dirichlet(GridFunction(G, np.ones(N))).values[255] == pytest.approx(0.125, abs=1e-12)


def test_lumped_integral():
    assert lumped_integral(GridFunction.sine(G).values ** 2, G.h) == pytest.approx(0.5, abs=1e-12)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    u = GridFunction(Grid(37), rng.standard_normal(37) * 1e-3)
    path = tmp_path / "u.csv"
    write_csv(u, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,u" and len(lines) == 37 + 3
    assert lines[1] == "0,0" and lines[-1] == "1,0"
    again = read_csv(path)
    assert again.grid == u.grid
    np.testing.assert_array_equal(again.values, u.values)


def test_csv_rejects_bad_files(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n0,0\n")
    with pytest.raises(ValueError):
        read_csv(path)
    path.write_text("t,u\n0,1\n0.5,1\n1,0\n")
    with pytest.raises(ValueError):
        read_csv(path)
