import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stiffspec.coeffs import parse_coeff
from stiffspec.ode import (
    FunctionTrace, SolvabilityError, default_grid, inner, integrate_ivp, integrate_ivp_forced, integrate_trace,
    linear_combination, ode_residual, quad, shoot, solve_constrained_bvp, trace_combine,
)

ONE = parse_coeff("1")
TOL = 1e-12


def test_quarter_wave():
    mu = math.pi**2 / 4
    t = integrate_ivp(ONE, ONE, mu, -1.0, 0.0, 0.0, 1.0, TOL)
    assert abs(t.u[-1] - 2 / math.pi) <= 10 * TOL
    assert abs(t.du[-1]) <= 10 * TOL
    xs = np.linspace(-1, 0, 41)
    assert np.max(np.abs(t(xs) - 2 / math.pi * np.sin(math.pi * (xs + 1) / 2))) <= 1e-10


def test_zero_frequency():
    t = integrate_ivp(ONE, ONE, 0.0, 0.0, 1.0, 1.0, 0.0, TOL)
    assert np.all(np.abs(t.u - 1.0) <= 1e-15)
    assert np.all(np.abs(t.du) <= 1e-15)


def test_sine():
    u, pu = shoot(ONE, ONE, 1.0, 0.0, 2.0, 0.0, 1.0, TOL)
    assert abs(u - math.sin(2.0)) <= 10 * TOL
    assert abs(pu - math.cos(2.0)) <= 10 * TOL


def test_forced_reductions():
    h = integrate_ivp(ONE, ONE, 2.0, 0.0, 1.0, 0.3, -0.2, TOL)
    f = integrate_ivp_forced(ONE, ONE, 2.0, 0.0, 1.0, 0.3, -0.2, lambda x: 0.0, TOL, h.nodes)
    assert np.max(np.abs(f.u - h.u)) <= 1e-14
    t = integrate_ivp_forced(ONE, ONE, 0.0, 0.0, 1.0, 0.0, 0.0, lambda x: 1.0, TOL)
    assert np.max(np.abs(t.u - t.nodes**2 / 2)) <= 1e-12


def test_resonant_secular_growth():
    u, _ = shoot(ONE, ONE, 1.0, 0.0, math.pi, 0.0, 0.0, TOL, f=lambda x: -math.sin(x))
    # variation of parameters: u = (x cos x - sin x) / 2
    assert abs(u + math.pi / 2) <= 1e-10


def test_quadrature():
    t = FunctionTrace.sample(lambda x: np.sin(np.pi * x / 2), lambda x: np.pi / 2 * np.cos(np.pi * x / 2), 0, 2)
    assert abs(inner(t, t) - 1.0) <= 1e-10
    one = FunctionTrace(np.linspace(-1, 0, 3), np.ones(3), np.zeros(3))
    assert abs(integrate_trace(one) - 1.0) <= 1e-14
    x = np.linspace(0, 1, 11)
    cube = FunctionTrace(x, x**3, 3 * x**2)  # cubic Hermite is exact here
    assert abs(integrate_trace(cube) - 0.25) <= 1e-14
    assert abs(quad(lambda x: x**3, 0, 1) - 0.25) <= 1e-14


def test_trace_arithmetic():
    t = integrate_ivp(ONE, ONE, 3.0, 0.0, 1.0, 0.0, 1.0, TOL)
    s = integrate_ivp(ONE, ONE, 3.0, 0.0, 1.0, 1.0, 0.0, TOL, t.nodes)
    assert np.array_equal(trace_combine(1.0, t, 0.0, t).u, t.u)
    assert np.all(trace_combine(1.0, t, -1.0, t).u == 0.0)
    mean = linear_combination([0.5, 0.5], [t, s])
    assert np.allclose(mean.u, 0.5 * (t.u + s.u), rtol=0, atol=1e-16)


_p = st.sampled_from(["1", "2+x*x", "1+x/4", "exp(x)", "2+sin(3*x)"])


@given(_p, _p, st.floats(0.5, 60.0))
def test_wronskian_conserved(ps, qs, mu):
    p, q = parse_coeff(ps), parse_coeff(qs)
    grid = default_grid(0.0, 1.0, math.sqrt(mu * 3))
    u = integrate_ivp(p, q, mu, 0.0, 1.0, 0.0, 1.0, TOL, grid)
    v = integrate_ivp(p, q, mu, 0.0, 1.0, 1.0, 0.0, TOL, grid)
    W = p(grid) * (u.u * v.du - u.du * v.u)
    assert np.max(np.abs(W - W[0])) <= 100 * TOL * max(1.0, abs(W[0])) * math.sqrt(mu)


@given(_p, _p, st.floats(0.5, 60.0), st.floats(-1, 1), st.floats(-1, 1))
def test_reversibility(ps, qs, mu, u0, pu0):
    p, q = parse_coeff(ps), parse_coeff(qs)
    u1, f1 = shoot(p, q, mu, 0.0, 1.0, u0, pu0, TOL)
    u2, f2 = shoot(p, q, mu, 1.0, 0.0, u1, f1, TOL)
    scale = max(1.0, abs(u0), abs(pu0)) * math.sqrt(mu)
    assert abs(u2 - u0) <= 100 * TOL * scale
    assert abs(f2 - pu0) <= 100 * TOL * scale


@given(_p, st.floats(0.5, 60.0))
def test_self_convergence(ps, mu):
    p = parse_coeff(ps)
    for tol in (1e-8, 1e-10):
        coarse = shoot(p, ONE, mu, 0.0, 1.0, 0.0, 1.0, tol)
        fine = shoot(p, ONE, mu, 0.0, 1.0, 0.0, 1.0, tol / 2)
        assert max(abs(coarse[0] - fine[0]), abs(coarse[1] - fine[1])) < tol * math.sqrt(mu) * 10


# ------------------------------------------------------------ constrained BVP

def test_nonresonant_homogeneous_zero():
    t = solve_constrained_bvp(ONE, ONE, 3.0, None, (("value", 0.0), ("value", 0.0)), interval=(0.0, 1.0))
    assert np.max(np.abs(t.u)) == 0.0


def test_resonant_constant_case():
    mu = math.pi**2 / 4
    v = FunctionTrace.sample(lambda x: np.sin(np.pi * x / 2), lambda x: np.pi / 2 * np.cos(np.pi * x / 2), 0, 2,
                             default_grid(0, 2, math.pi / 2).size - 1)
    # balanced by the boundary value: int_0^2 f v = -1 = -(u v')(0) = pi/2 u(0)  =>  u(0) = -2/pi
    info = {}
    u = solve_constrained_bvp(ONE, ONE, mu, lambda x: -math.sin(math.pi * x / 2),
                              (("value", -2 / math.pi), ("value", 0.0)), weight=ONE, ortho_to=v, info=info)
    assert info["solvability"] < 1e-9
    assert abs(inner(u, v)) <= 1e-9
    assert ode_residual(u, ONE, mu, ONE, lambda x: -np.sin(np.pi * x / 2)) < 1e-6
    shifted = trace_combine(1.0, u, 0.7, v)
    assert abs(inner(shifted, v) - 0.7) <= 1e-9
    assert ode_residual(shifted, ONE, mu, ONE, lambda x: -np.sin(np.pi * x / 2)) < 1e-6


def test_resonant_unbalanced_raises():
    mu = math.pi**2 / 4
    v = FunctionTrace.sample(lambda x: np.sin(np.pi * x / 2), lambda x: np.pi / 2 * np.cos(np.pi * x / 2), 0, 2)
    with pytest.raises(SolvabilityError):
        solve_constrained_bvp(ONE, ONE, mu, lambda x: -math.sin(math.pi * x / 2),
                              (("value", 0.0), ("value", 0.0)), weight=ONE, ortho_to=v)


def test_bad_tolerance():
    with pytest.raises(ValueError):
        integrate_ivp(ONE, ONE, 1.0, 0.0, 1.0, 0.0, 1.0, 1e-3)
