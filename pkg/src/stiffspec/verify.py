"""Measurable diagnostics: convergence orders, quasimode residuals, bounds, angles, projectors."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .coeffs import ProblemSpec
from .expand import Branch, ExpansionSeries, PartialSum, algebraic_residual, expand, partial_sum
from .limit import Kind, LimitMode, build_mode, limit_spectrum
from .ode import FunctionTrace, TracePair, gauss_points, inner, inner_derivative
from .perturbed import (
    EigenPair,
    WeightedMetric,
    eigenpairs,
    eigenvalues,
    inner_R,
    dirichlet_bounds,
    inner_plain,
    minmax_lower,
)

SLOPE_TOL = 0.15
BOUND_RTOL = 1e-10
H2_FLOOR = 1e-6


def default_eps_grid(points: int = 7, lo: float = 1e-5, hi: float = 1e-2) -> list[float]:
    """Log-spaced, strictly decreasing."""
    return [float(x) for x in np.logspace(math.log10(hi), math.log10(lo), points)]


def fit_slope(eps, errors) -> float:
    x = np.log(np.asarray(eps, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class ConvergenceReport:
    quantity: str
    eps_grid: list[float]
    errors: list[float]
    fitted_slope: float | None
    expected_slope: float | None
    passed: bool
    slope_tol: float = SLOPE_TOL
    extra: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _report(quantity, eps, errors, expected, tol=None, extra=None, note="", floor=None,
            at_least=False):
    tol = SLOPE_TOL if tol is None else tol
    eps = [float(e) for e in eps]
    errors = [float(e) for e in errors]
    if floor is not None and max(errors) <= floor:
        return ConvergenceReport(quantity, eps, errors, None, expected, True, tol, extra or {},
                                 note or "errors at numerical floor; slope fit skipped")
    slope = fit_slope(eps, errors)
    if expected is None:
        ok = True
    elif at_least:
        ok = slope >= expected - tol
    else:
        ok = abs(slope - expected) <= tol
    return ConvergenceReport(quantity, eps, errors, slope, expected, ok, tol, extra or {}, note)


def _check_grid(eps_grid):
    eps = sorted((float(e) for e in eps_grid), reverse=True)
    if len(eps) < 4:
        raise ValueError("eps grid needs at least 4 points")
    if eps[0] > 0.1 or eps[-1] <= 0:
        raise ValueError("eps grid must lie in (0, 0.1]")
    return eps


# ---------------------------------------------------------------- mode bookkeeping

@lru_cache(maxsize=64)
def locate(p: ProblemSpec, index: int) -> tuple[LimitMode, int]:
    """Built limit mode at 1-based slot `index` and the first slot it occupies."""
    spec = limit_spectrum(p, count=index + 1, functions=False)
    mode = spec[index - 1]
    first = index - 1 if index >= 2 and spec[index - 2] is mode else index
    return build_mode(p, mode), first


@lru_cache(maxsize=64)
def series_for(p: ProblemSpec, index: int, n: int) -> dict:
    mode, _ = locate(p, index)
    return {s.branch: s for s in expand(p, mode, n)}


def slot_of(p: ProblemSpec, index: int, branch: Branch) -> int:
    mode, first = locate(p, index)
    if mode.kind is Kind.Double:
        return first + (1 if branch is Branch.Plus else 0)
    return first


def _branches(p, index, branch):
    mode, _ = locate(p, index)
    if mode.kind is Kind.Double:
        return [Branch(branch)] if branch not in (None, Branch.Single) else [Branch.Minus, Branch.Plus]
    return [Branch.Single]


# ---------------------------------------------------------------- residuals

def _weighted_norm_sq(p: ProblemSpec, eps: float, cells) -> float:
    (nl, cl), (nr, cr) = cells
    hl, hr = np.diff(nl), np.diff(nr)
    ml, mr = 0.5 * (nl[1:] + nl[:-1]), 0.5 * (nr[1:] + nr[:-1])
    left = float(np.sum(hl * cl * cl / p.r(ml)))
    right = float(np.sum(hr * cr * cr / p.rho(mr)))
    return eps * left + eps * eps * right


def numeric_residual_cells(p: ProblemSpec, mu: float, V: TracePair):
    """Cell averages of (K V')' + mu W V computed from the stored slopes (K = k or kappa)."""
    out = []
    for t, pc, q in ((V.left, p.k, p.r), (V.right, p.kappa, p.rho)):
        nodes = t.nodes
        F = pc(nodes) * t.du
        x, w = gauss_points(nodes)
        mass = (w * q(x) * t(x)).reshape(-1, 5).sum(axis=1)
        out.append((nodes, (np.diff(F) + mu * mass) / np.diff(nodes)))
    return out


def eps_norm(p: ProblemSpec, eps: float, V: TracePair) -> float:
    return WeightedMetric(eps).norm(p, V)


def quasimode_residual(p: ProblemSpec, eps: float, ps, method: str = "max") -> float:
    """sigma = |A_eps V - Lambda V|_eps / |V|_eps.

    ``ps`` is a PartialSum or an EigenPair. method: 'algebraic' (exact leftover terms of the
    series), 'numeric' (from the traces) or 'max' of both.
    """
    if isinstance(ps, EigenPair):
        V, mu = ps.pair, ps.mu
        alg = None
    else:
        V, mu = ps.V, ps.mu
        alg = ps
    nrm = eps_norm(p, eps, V)
    vals = []
    if method in ("numeric", "max") or alg is None:
        vals.append(math.sqrt(_weighted_norm_sq(p, eps, numeric_residual_cells(p, mu, V))) / nrm)
    if method in ("algebraic", "max") and alg is not None:
        vals.append(math.sqrt(_weighted_norm_sq(p, eps, algebraic_residual(p, alg))) / nrm)
    return max(vals)


@dataclass
class Containment:
    epsilon: float
    index: int
    branch: str
    order: int
    Lambda: float
    sigma: float
    nearest: float
    distance: float
    ok: bool


def containment(p: ProblemSpec, eps: float, ps: PartialSum, index: int, count: int | None = None) -> Containment:
    """Check that some eigenvalue lies within sigma of Lambda."""
    sigma = quasimode_residual(p, eps, ps)
    count = count or index + 3
    lams = np.array([e.lam for e in eigenvalues(p, eps, count)])
    k = int(np.argmin(np.abs(lams - ps.Lambda)))
    d = abs(float(lams[k]) - ps.Lambda)
    return Containment(eps, index, ps.series.branch.value, ps.order, ps.Lambda, sigma, float(lams[k]), d,
                       d <= sigma)


def containment_study(p: ProblemSpec, eps_grid, orders=(0, 1, 2, 3), count: int = 4) -> list[Containment]:
    """Every distinct mode among the first `count` slots, every order and branch."""
    out = []
    spec = limit_spectrum(p, count=count, functions=False)
    for index, _ in spec.distinct():
        for n in orders:
            for s in series_for(p, index, n).values():
                for eps in eps_grid:
                    out.append(containment(p, eps, partial_sum(s, eps, p), index, count + 2))
    return out


def residual_study(p: ProblemSpec, index: int, n: int, eps_grid, branch=None) -> list[ConvergenceReport]:
    """sigma(eps) slopes, required to be at least n/2 + 1 (double), n + 2 (SimpleA1) or n + 3/2 (SimpleA2).

    sigma is measured for the operator whose eigenvalues are lambda = eps mu.
    """
    eps = _check_grid(eps_grid)
    out = []
    for br in _branches(p, index, branch):
        s = series_for(p, index, n)[br]
        sig = [quasimode_residual(p, e, partial_sum(s, e, p), "algebraic") for e in eps]
        expected = n / 2 + 1 if s.half_power else n + (2 if s.mode.kind is Kind.SimpleA1 else 1.5)
        out.append(_report(f"quasimode residual slot {index} {br.value} n={n}", eps, sig, expected,
                           floor=1e-300 if s.exact_flag else None, at_least=True))
    return out


# ---------------------------------------------------------------- order studies

def order_study(p: ProblemSpec, index: int, n: int, eps_grid, branch=None) -> list[ConvergenceReport]:
    """|mu_j(eps) - (mu + sum t^m nu_m)| against eps; one report per branch."""
    eps = _check_grid(eps_grid)
    out = []
    for br in _branches(p, index, branch):
        s = series_for(p, index, n)[br]
        j = slot_of(p, index, br)
        errs = [abs(eigenvalues(p, e, j)[-1].mu - s.mu_sum(e)) for e in eps]
        expected = (n + 1) / 2 if s.half_power else n + 1
        floor = 1e-10 * s.mode.mu if s.exact_flag else None
        out.append(_report(f"eigenvalue error slot {j} {br.value} n={n}", eps, errs, expected,
                           extra={"nu": list(s.nu), "exact_flag": s.exact_flag}, floor=floor))
    return out


def _h1_error(e_left: FunctionTrace, e_right: FunctionTrace) -> float:
    tot = 0.0
    for t in (e_left, e_right):
        tot += inner(t, t) + inner_derivative(t, t)
    return math.sqrt(tot)


def eigenfunction_error_study(p: ProblemSpec, index: int, n: int, eps_grid, branch=None) -> list[ConvergenceReport]:
    """H1(a,b) distance between u_{eps,j} and theta U_{eps,n}, theta the L2(R) projection coefficient.

    The series is oriented so that theta > 0.
    """
    eps = _check_grid(eps_grid)
    out = []
    for br in _branches(p, index, branch):
        s = series_for(p, index, n)[br]
        j = slot_of(p, index, br)
        errs, thetas = [], []
        for e in eps:
            u = eigenpairs(p, e, j)[-1].pair
            U = partial_sum(s, e, p).U
            theta = inner_R(p, u, U) / inner_R(p, U, U)
            thetas.append(abs(theta))
            if theta < 0:
                U, theta = -U, -theta
            d = u - U * theta
            errs.append(_h1_error(d.left, d.right))
        expected = (n + 1) / 2 if s.half_power else n + 1
        out.append(_report(f"eigenfunction H1 error slot {j} {br.value} n={n}", eps, errs, expected,
                           extra={"theta": thetas}, floor=1e-8 if s.exact_flag else None))
    return out


def _unit(p, t: TracePair, plain: bool):
    n = math.sqrt(inner_plain(t, t) if plain else inner_R(p, t, t))
    return t / n


def angle_between(p, t1: TracePair, t2: TracePair, plain: bool = True) -> float:
    """Angle between two lines; robust for tiny angles."""
    u1, u2 = _unit(p, t1, plain), _unit(p, t2, plain)
    ip = inner_plain(u1, u2) if plain else inner_R(p, u1, u2)
    d = u1 - u2 * math.copysign(1.0, ip)
    dn = math.sqrt(inner_plain(d, d) if plain else inner_R(p, d, d))
    return 2.0 * math.asin(min(1.0, 0.5 * dn))


def first_double(p: ProblemSpec, count: int = 12) -> int:
    spec = limit_spectrum(p, count=count, functions=False)
    for index, m in spec.distinct():
        if m.kind is Kind.Double:
            return index
    raise ValueError("no double limit eigenvalue among the first slots")


def angle_study(p: ProblemSpec, eps_grid, index: int | None = None) -> ConvergenceReport:
    """Plain L2 angle between the bifurcating pair, and their eps-inner product."""
    eps = _check_grid(eps_grid)
    index = first_double(p) if index is None else index
    _, j = locate(p, index)
    angles, orth, dist = [], [], []
    for e in eps:
        um, up = eigenpairs(p, e, j + 1)[-2:]
        angles.append(angle_between(p, um.pair, up.pair, plain=True))
        orth.append(abs(WeightedMetric(e).inner(p, um.pair, up.pair)))
        d = um.pair - up.pair
        dist.append(math.sqrt(inner_plain(d, d)))
    rep = _report(f"plain L2 angle slots {j},{j + 1}", eps, angles, 0.5,
                  extra={"eps_inner": orth, "l2_distance": dist})
    rep.passed = rep.passed and max(orth) < 1e-8
    return rep


def principal_distance(p: ProblemSpec, basis1, basis2, plain: bool = False) -> float:
    """|P1 - P2| for the spans of two bases, via principal angles in L2(R) (or plain L2)."""
    ip = (lambda a, b: inner_plain(a, b)) if plain else (lambda a, b: inner_R(p, a, b))
    G1 = np.array([[ip(a, b) for b in basis1] for a in basis1])
    G2 = np.array([[ip(a, b) for b in basis2] for a in basis2])
    C = np.array([[ip(a, b) for b in basis2] for a in basis1])
    for G in (G1, G2):
        d = np.diag(G)
        if np.linalg.det(G / np.sqrt(np.outer(d, d))) <= 1e-12:
            raise np.linalg.LinAlgError("degenerate Gram matrix")
    L1 = np.linalg.cholesky(G1)
    L2 = np.linalg.cholesky(G2)
    M = np.linalg.solve(L1, np.linalg.solve(L2, C.T).T)
    s = np.linalg.svd(M, compute_uv=False)
    if len(basis1) != len(basis2):
        return 1.0
    return float(math.sqrt(max(0.0, 1.0 - min(1.0, float(np.min(s))) ** 2)))


def line_distance(p: ProblemSpec, t: TracePair, line: TracePair) -> float:
    """Sine of the L2(R) angle between t and a line."""
    return math.sin(angle_between(p, t, line, plain=False))


def projector_study(p: ProblemSpec, eps_grid, index: int | None = None) -> ConvergenceReport:
    """|P_{pi(eps)} - P_pi| with pi = span(U, U*), pi(eps) = span of the bifurcating pair."""
    eps = _check_grid(eps_grid)
    index = first_double(p) if index is None else index
    mode, j = locate(p, index)
    limit_basis = [mode.U, mode.Ustar]
    dists, gdist, fdist, gammas = [], [], [], []
    for e in eps:
        um, up = eigenpairs(p, e, j + 1)[-2:]
        f = (up.pair + um.pair) * 0.5
        g = (up.pair - um.pair) * (1.0 / (2.0 * mode.omega * math.sqrt(e)))
        dists.append(principal_distance(p, [f, g], limit_basis))
        gdist.append(line_distance(p, g, mode.Ustar))
        fdist.append(line_distance(p, f, mode.U))
        # u_{j+1} - u_j over sqrt(eps), projected on U*
        dd = (up.pair - um.pair) * (1.0 / math.sqrt(e))
        gammas.append(inner_R(p, dd, mode.Ustar) / inner_R(p, mode.Ustar, mode.Ustar))
    tail = dists[len(dists) // 2:]
    monotone = all(b < a for a, b in zip(tail, tail[1:]))
    rep = _report(f"projector distance slots {j},{j + 1}", eps, dists, None,
                  extra={"g_to_Ustar_line": gdist, "f_to_U_line": fdist, "gamma": gammas,
                         "tail_monotone": monotone,
                         "f_slope": fit_slope(eps, fdist), "g_slope": fit_slope(eps, gdist)},
                  note="rate reported, not asserted")
    rep.passed = (monotone and dists[-1] < 0.05) if min(eps) <= 1e-5 else monotone
    return rep


# ---------------------------------------------------------------- bounds and H2

@dataclass
class BoundsRow:
    epsilon: float
    j: int
    lower: float
    lam: float
    upper: float
    ok: bool


def bounds_check(p: ProblemSpec, eps_grid, jmax: int) -> tuple[bool, list[BoundsRow]]:
    """eps (k*/r*) omega_1^2 <= lambda_j <= eps mu^D_j for j <= jmax (relative slack 1e-10).

    mu^D_j is the j-th eigenvalue of the right Dirichlet problem.
    """
    upper = dirichlet_bounds(p, jmax)
    rows = []
    for e in eps_grid:
        lo = e * minmax_lower(p, e)
        for pair in eigenvalues(p, e, jmax):
            hi = e * upper[pair.j - 1]
            ok = lo <= pair.lam * (1 + BOUND_RTOL) and pair.lam <= hi * (1 + BOUND_RTOL)
            rows.append(BoundsRow(float(e), pair.j, lo, pair.lam, hi, ok))
    return all(r.ok for r in rows), rows


def _h2_side(d: FunctionTrace) -> float:
    x = d.nodes
    d2 = np.gradient(d.du, x, edge_order=2)
    return math.sqrt(inner(d, d) + inner_derivative(d, d) + float(np.trapezoid(d2 * d2, x)))


def h2_study(p: ProblemSpec, index: int, eps_grid) -> dict:
    """H2 distances on (a,0) and (0,b) between u_{eps,j} and theta U for a simple mode."""
    eps = _check_grid(eps_grid)
    mode, j = locate(p, index)
    if mode.kind is Kind.Double:
        raise ValueError("H2 study applies to simple modes")
    U = mode.U
    left, right = [], []
    for e in eps:
        u = eigenpairs(p, e, j)[-1].pair
        theta = inner_R(p, u, U) / inner_R(p, U, U)
        d = u - U * theta
        left.append(_h2_side(d.left))
        right.append(_h2_side(d.right))
    tail = slice(len(eps) // 2, None)

    def side_ok(v):
        # a side already at the numerical floor has nothing left to decrease
        t = v[tail]
        return max(v) < H2_FLOOR or all(b < a for a, b in zip(t, t[1:]))

    ok = side_ok(left) and side_ok(right)
    return {"slot": j, "eps": eps, "left": left, "right": right, "passed": bool(ok), "exact": mode.exact}


def series_consistency(p: ProblemSpec, series: ExpansionSeries) -> float:
    """Max deviation of stored nu_m from their recomputation out of the stored traces (simple series)."""
    if series.branch is not Branch.Single:
        return 0.0
    kind = series.mode.kind
    dev = 0.0
    for m, nu in enumerate(series.nu, start=1):
        if kind is Kind.SimpleA1:
            ref = -float(p.kappa(0.0) * series.right_coeffs[m - 1].du[0]) * float(series.left_coeffs[0].u[-1])
        else:
            ref = -float(p.kappa(0.0) * series.right_coeffs[0].du[0]) * float(series.left_coeffs[m].u[-1])
        dev = max(dev, abs(ref - nu))
    return dev


def sign_law(plus: ExpansionSeries, minus: ExpansionSeries) -> float:
    return max((abs(b - (-1) ** m * a) for m, (a, b) in enumerate(zip(plus.nu, minus.nu), start=1)),
               default=0.0)
