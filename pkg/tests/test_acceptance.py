"""Acceptance criteria, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py`` (lines appear in the terminal summary) or
``python3 tests/test_acceptance.py`` for the bare report.
"""
import math
import sys
import time

import numpy as np
import pytest

from stiffspec.coeffs import demo_problem, make_problem, symmetric_problem, variable_problem
from stiffspec.expand import Branch
from stiffspec.fdm import fd_richardson
from stiffspec.limit import Kind, limit_spectrum, mode_at
from stiffspec.perturbed import constant_case_eigenvalue_pair, eigenpair, eigenvalues
from stiffspec.verify import (
    angle_study, bounds_check, containment_study, default_eps_grid, order_study, projector_study, series_for,
    sign_law,
)

GRID = default_eps_grid()
RESULTS: dict[int, tuple[bool, str]] = {}


def c1_closed_form():
    p = demo_problem()
    t0 = time.perf_counter()
    worst = 0.0
    for eps in (1e-2, 1e-3, 1e-4):
        lam = [e.lam for e in eigenvalues(p, eps, 2)]
        ref = [eps * m for m in constant_case_eigenvalue_pair(eps)]
        worst = max(worst, *(abs(a / b - 1) for a, b in zip(lam, ref)))
    dt = time.perf_counter() - t0
    return worst < 1e-9 and dt < 5.0, f"max rel err {worst:.2e} (tol 1e-9), {dt:.2f} s (limit 5 s)"


def c2_limit_structure():
    p = demo_problem()
    spec = limit_spectrum(p, count=6, functions=False)
    kinds = {round(m.mu / math.pi**2, 9): m.kind for m in spec}
    want = {0.25: Kind.Double, 1.0: Kind.SimpleA2, 2.25: Kind.Double, 4.0: Kind.SimpleA2}
    omega = mode_at(p, 1).omega
    err = abs(omega - math.pi / math.sqrt(2))
    eps = 1e-10
    s = math.asin(math.sqrt(eps / (2 + 2 * eps)))
    coeff = ((math.pi / 2 + s) ** 2 - (math.pi / 2 - s) ** 2) / (2 * math.sqrt(eps))
    cross = abs(coeff - omega)
    ok = kinds == want and err < 1e-9 and cross < 1e-6
    return ok, f"kinds {'ok' if kinds == want else kinds}, |omega - pi/sqrt2| {err:.1e} (tol 1e-9), " \
               f"closed-form sqrt(eps) coefficient diff {cross:.1e}"


def c3_double_orders():
    p = demo_problem()
    slopes, ok = [], True
    for n in (1, 2, 3):
        for rep in order_study(p, 1, n, GRID):
            slopes.append(f"n={n} {rep.quantity.split()[4]} {rep.fitted_slope:.3f}")
            ok &= abs(rep.fitted_slope - (n + 1) / 2) <= 0.15
    return ok, "; ".join(slopes) + " (target (n+1)/2 +- 0.15)"


def c4_simple_orders():
    p = variable_problem()
    parts, ok = [], True
    for index in (1, 2):
        for n in (0, 1):
            (rep,) = order_study(p, index, n, GRID)
            parts.append(f"slot {index} n={n} {rep.fitted_slope:.3f}")
            ok &= abs(rep.fitted_slope - (n + 1)) <= 0.15
    kinds = [mode_at(p, i).kind.value for i in (1, 2)]
    return ok, "; ".join(parts) + f" (kinds {kinds}, target n+1 +- 0.15)"


def c5_exact_case():
    p = symmetric_problem()
    dev, traces = 0.0, []
    xs = np.linspace(-2, 2, 401)
    for eps in (1e-1, 1e-2, 1e-3):
        e = eigenpair(p, eps, 1)
        dev = max(dev, abs(e.mu / (math.pi**2 / 16) - 1))
        traces.append(np.where(xs <= 0, e.left(np.minimum(xs, 0)), e.right(np.maximum(xs, 0))))
    sup = max(float(np.max(np.abs(t - traces[0]))) for t in traces[1:])
    flag = series_for(p, 1, 3)[Branch.Single].exact_flag
    ok = dev < 1e-10 and flag and sup < 1e-9
    return ok, f"rel dev {dev:.1e} (tol 1e-10), exact_flag {flag}, trace sup diff {sup:.1e} (tol 1e-9)"


def c6_bounds():
    parts, ok = [], True
    for name, p in (("demo", demo_problem()), ("variable", variable_problem())):
        good, rows = bounds_check(p, GRID, 6)
        ok &= good
        parts.append(f"{name} {sum(r.ok for r in rows)}/{len(rows)}")
    return ok, ", ".join(parts) + " inequalities hold (j <= 6)"


def c7_angle():
    rep = angle_study(demo_problem(), GRID)
    inner = max(rep.extra["eps_inner"])
    return rep.passed, f"angle slope {rep.fitted_slope:.3f} (0.5 +- 0.15), max |(u-,u+)_eps| {inner:.1e} (< 1e-8)"


def c8_projector():
    rep = projector_study(demo_problem(), GRID)
    g = rep.extra["g_to_Ustar_line"]
    ok = rep.passed and rep.errors[-1] < 0.05 and g[-1] < g[0]
    return ok, f"distance {rep.errors[0]:.1e} -> {rep.errors[-1]:.1e} at eps=1e-5 (< 0.05), " \
               f"tail monotone {rep.extra['tail_monotone']}, g-line distance {g[0]:.1e} -> {g[-1]:.1e}"


def c9_containment():
    total, bad, worst = 0, 0, 0.0
    for p, count in ((demo_problem(), 5), (variable_problem(), 4), (symmetric_problem(), 3)):
        for c in containment_study(p, GRID, orders=(0, 1, 2, 3), count=count):
            total += 1
            bad += not c.ok
            if c.sigma > 0:
                worst = max(worst, c.distance / c.sigma)
    return bad == 0, f"{bad} violations in {total} quasimodes, max distance/sigma {worst:.2f}"


FD_PROBLEMS = (
    dict(k="2+x*x", rho="1+x/4"),
    dict(k="exp(x)", r="2+sin(x)", kappa="1+x*x/4"),
    dict(k="1+x*x", r="1-x/3", kappa="2+cos(x)", rho="1+x/2"),
)


def c10_fd_oracle():
    worst = 0.0
    for src in FD_PROBLEMS:
        p = make_problem(-1, 2, **src)
        fd = fd_richardson(p, 1e-2, 4)
        mus = np.array([e.mu for e in eigenvalues(p, 1e-2, 4)])
        worst = max(worst, float(np.max(np.abs(fd / mus - 1))))
    return worst < 1e-6, f"max rel diff {worst:.1e} over 3 problems, j <= 4 (tol 1e-6)"


def c11_sign_law():
    worst, count = 0.0, 0
    for p in (demo_problem(), make_problem(-1.5, 3, k="2", kappa="2"), make_problem(-0.5, 1, r="3", rho="3")):
        for index, m in limit_spectrum(p, count=5, functions=False).distinct():
            if m.kind is not Kind.Double:
                continue
            s = series_for(p, index, 4)
            worst = max(worst, sign_law(s[Branch.Plus], s[Branch.Minus]))
            count += 1
    return worst < 1e-9 and count > 0, f"max |nu_m^- - (-1)^m nu_m^+| {worst:.1e} over {count} double modes (tol 1e-9)"


CRITERIA = {
    1: ("closed-form reproduction", c1_closed_form),
    2: ("limit spectrum and Jordan structure", c2_limit_structure),
    3: ("double-branch order law", c3_double_orders),
    4: ("simple-mode order law", c4_simple_orders),
    5: ("exact-eigenvalue detection", c5_exact_case),
    6: ("min-max sandwich", c6_bounds),
    7: ("angle collapse and metric orthogonality", c7_angle),
    8: ("projector convergence", c8_projector),
    9: ("quasimode containment", c9_containment),
    10: ("finite-difference oracle", c10_fd_oracle),
    11: ("sign law", c11_sign_law),
}


def line(i: int) -> str:
    ok, detail = RESULTS[i]
    return f"{'PASS' if ok else 'FAIL'}  criterion {i:2d} {CRITERIA[i][0]}: {detail}"


@pytest.mark.parametrize("i", sorted(CRITERIA))
def test_criterion(i):
    name, fn = CRITERIA[i]
    RESULTS[i] = fn()
    print(line(i))
    assert RESULTS[i][0], line(i)


if __name__ == "__main__":
    for i, (_, fn) in CRITERIA.items():
        RESULTS[i] = fn()
        print(line(i), flush=True)
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
