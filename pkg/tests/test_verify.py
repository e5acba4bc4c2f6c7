import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stiffspec.coeffs import symmetric_problem
from stiffspec.expand import partial_sum
from stiffspec.limit import mode_at
from stiffspec.perturbed import eigenpair
from stiffspec.verify import (
    angle_study, bounds_check, containment, containment_study, default_eps_grid, eigenfunction_error_study,
    fit_slope, h2_study, order_study, principal_distance, projector_study, quasimode_residual, residual_study,
    series_for,
)


@given(st.floats(0.5, 4.0), st.floats(-3.0, 3.0))
def test_fit_slope_exact_power(s, c):
    eps = default_eps_grid()
    assert fit_slope(eps, [math.exp(c) * e**s for e in eps]) == pytest.approx(s, abs=1e-12)


def test_grid_validation(demo):
    with pytest.raises(ValueError):
        order_study(demo, 1, 1, [1e-2, 1e-3, 1e-4])
    with pytest.raises(ValueError):
        order_study(demo, 1, 1, [0.5, 1e-2, 1e-3, 1e-4])


def test_double_order_n1(demo, grid):
    for rep in order_study(demo, 1, 1, grid):
        assert rep.passed and abs(rep.fitted_slope - 1.0) <= 0.15


def test_exact_case_floor(symmetric, grid):
    (rep,) = order_study(symmetric, 1, 2, grid)
    assert rep.passed and rep.fitted_slope is None
    assert max(rep.errors) < 1e-11


def test_slope_reproducible_under_shift(demo, variable):
    base = default_eps_grid()
    shifted = default_eps_grid(lo=10**-5.25, hi=10**-2.25)
    for p, index, n in ((demo, 1, 1), (demo, 1, 2), (variable, 2, 1)):
        a = [r.fitted_slope for r in order_study(p, index, n, base)]
        b = [r.fitted_slope for r in order_study(p, index, n, shifted)]
        assert np.max(np.abs(np.subtract(a, b))) < 0.05


def test_exact_eigenpair_residual(demo, variable):
    for p in (demo, variable):
        for j in (1, 2, 3):
            assert quasimode_residual(p, 1e-3, eigenpair(p, 1e-3, j)) < 1e-8


def test_containment_demo(demo):
    for s in series_for(demo, 1, 3).values():
        c = containment(demo, 1e-3, partial_sum(s, 1e-3, demo), 1)
        assert c.ok and c.distance <= c.sigma


def test_residual_double(demo, grid):
    for n in (1, 2):
        for rep in residual_study(demo, 1, n, grid):
            assert rep.passed and rep.fitted_slope >= n / 2 + 1 - 0.15


def test_eigenfunction_error(demo, grid):
    for rep in eigenfunction_error_study(demo, 1, 1, grid):
        assert rep.passed
        assert rep.extra["theta"][-1] > 0.5
    (rep,) = eigenfunction_error_study(symmetric_problem(), 1, 1, grid)
    assert rep.passed and max(rep.errors) < 1e-8


def test_angle(demo, grid):
    rep = angle_study(demo, grid)
    assert rep.passed
    assert max(rep.extra["eps_inner"]) < 1e-8
    d = rep.extra["l2_distance"]
    assert d[-1] < d[0]


def test_projector(demo, grid):
    rep = projector_study(demo, grid)
    assert rep.passed
    assert rep.errors[-1] < 0.05
    assert rep.extra["g_to_Ustar_line"][-1] < 1e-4
    assert rep.extra["f_slope"] >= 0.5


def test_identical_planes(demo):
    m = mode_at(demo, 1)
    assert principal_distance(demo, [m.U, m.Ustar], [m.U, m.Ustar]) < 1e-12
    assert principal_distance(demo, [m.U, m.Ustar], [m.U + m.Ustar, m.Ustar * 2.0]) < 1e-7


def test_bounds(demo, variable):
    ok, rows = bounds_check(demo, [1e-2], 2)
    assert ok and len(rows) == 2
    ok, rows = bounds_check(variable, default_eps_grid(), 6)
    assert ok


def test_upper_bound_tight_for_a2_first(variable):
    # the first limit point of this problem is SimpleA2, so mu_1(eps) tends to the Dirichlet value
    m = mode_at(variable, 1)
    _, rows = bounds_check(variable, [1e-5], 1)
    assert rows[0].lam / rows[0].upper == pytest.approx(1.0, abs=1e-4)
    assert rows[0].upper / 1e-5 == pytest.approx(m.mu, rel=1e-10)


def test_h2(variable, grid):
    for index in (1, 2):
        assert h2_study(variable, index, grid)["passed"]


def test_containment_study_small(variable):
    rows = containment_study(variable, [1e-2, 1e-3, 1e-4, 1e-5], orders=(0, 1), count=3)
    assert rows and all(r.ok for r in rows)
