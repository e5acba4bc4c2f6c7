"""Asymptotic series for the eigenpairs near a limit eigenvalue.

A simple limit point gives a series in t = eps, a double point gives two branches in
t = sqrt(eps). In both cases mu(eps) ~ mu + sum t^m nu_m and the eigenfunction is
sum t^m (c_m^L, c_m^R) with

    (k c_m^L')' + mu r c_m^L     = -r   sum_{j>=1} nu_j c_{m-j}^L
    (kappa c_m^R')' + mu rho c_m^R = -rho sum_{j>=1} nu_j c_{m-j}^R
    c_m^L(0) = c_m^R(0),  (k c_m^L')(0) = (kappa c_{m-d}^R')(0)

where eps = t^d. Each nu_m comes from the solvability condition of a resonant problem.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .coeffs import ProblemSpec
from .limit import Kind, LimitMode, build_mode
from .ode import (
    DEFAULT_TOL,
    FunctionTrace,
    SolvabilityError,
    TracePair,
    gauss_points,
    linear_combination,
    solve_constrained_bvp,
)

MAX_ORDER = 6

__all__ = [
    "Branch",
    "ExpansionSeries",
    "PartialSum",
    "SolvabilityError",
    "expand",
    "expand_double",
    "expand_simple_A1",
    "expand_simple_A2",
    "partial_sum",
    "solve_constrained_bvp",
]


class Branch(str, Enum):
    Single = "Single"
    Plus = "Plus"
    Minus = "Minus"


class Forcing:
    """x -> c * q(x) * T(x), usable both pointwise and on arrays."""

    __slots__ = ("q", "trace", "c")

    def __init__(self, q, trace: FunctionTrace, c: float = -1.0):
        self.q, self.trace, self.c = q, trace, c

    def scalar(self, x):
        return self.c * self.q.scalar(x) * self.trace.scalar(x)

    def __call__(self, x):
        return self.c * self.q(x) * self.trace(x)


@dataclass(frozen=True)
class ExpansionSeries:
    mode: LimitMode
    branch: Branch
    order: int
    nu: tuple[float, ...]
    left_coeffs: tuple[FunctionTrace, ...]
    right_coeffs: tuple[FunctionTrace, ...]
    exact_flag: bool = False
    alpha: tuple[float, ...] = ()
    beta: tuple[float, ...] = ()
    solvability: tuple[float, ...] = field(default=(), repr=False)

    @property
    def half_power(self) -> bool:
        return self.branch is not Branch.Single

    def t(self, eps: float) -> float:
        return math.sqrt(eps) if self.half_power else eps

    def mu_sum(self, eps: float) -> float:
        t = self.t(eps)
        return self.mode.mu + sum(t**m * nu for m, nu in enumerate(self.nu, start=1))

    def eigenvalue(self, eps: float) -> float:
        return eps * self.mu_sum(eps)


@dataclass(frozen=True)
class PartialSum:
    epsilon: float
    order: int
    Lambda: float
    U: TracePair
    V: TracePair
    beta_resid: float
    series: ExpansionSeries = field(repr=False)

    @property
    def mu(self) -> float:
        return self.Lambda / self.epsilon


def _sum(q, coeffs, traces):
    """Trace sum_j coeffs[j] * traces[j], or None if every coefficient vanishes."""
    pairs = [(c, t) for c, t in zip(coeffs, traces) if c != 0.0]
    if not pairs:
        return None
    return linear_combination([c for c, _ in pairs], [t for _, t in pairs])


def _forcing(q, nu, traces, m, start=1):
    """-q * sum_{j=start}^{m} nu_j traces[m-j]."""
    js = [j for j in range(start, m + 1) if j <= len(nu) and m - j >= 0]
    T = _sum(q, [nu[j - 1] for j in js], [traces[m - j] for j in js])
    return None if T is None else Forcing(q, T)


def _check_order(n: int) -> int:
    if n < 0:
        raise ValueError("order must be non-negative")
    if n > MAX_ORDER:
        warnings.warn(f"order {n} clamped to {MAX_ORDER}", stacklevel=3)
        return MAX_ORDER
    return n


def _ensure_built(p, mode):
    if mode.U is None or (mode.kind is Kind.Double and mode.Ustar is None):
        return build_mode(p, mode)
    return mode


def _flux(q_coeff, t: FunctionTrace, end: int) -> float:
    x = t.nodes[end]
    return float(q_coeff(x) * t.du[end])


def _offset(nu_offset, m):
    return 0.0 if not nu_offset else float(nu_offset.get(m, 0.0))


def expand_simple_A1(p: ProblemSpec, mode: LimitMode, n: int, tol: float = DEFAULT_TOL,
                     nu_offset: dict | None = None) -> ExpansionSeries:
    """Series in eps for a simple eigenvalue of the left operator."""
    if mode.kind is not Kind.SimpleA1:
        raise ValueError("mode is not SimpleA1")
    n = _check_order(n)
    mode = _ensure_built(p, mode)
    mu = mode.mu
    y = [mode.U.left]
    z = [mode.U.right]
    y00 = float(y[0].u[-1])
    if mode.exact:
        return ExpansionSeries(mode, Branch.Single, 0, (), tuple(y), tuple(z), exact_flag=True)
    nu, log = [], []
    for m in range(1, n + 1):
        nu.append(-_flux(p.kappa, z[m - 1], 0) * y00 + _offset(nu_offset, m))
        info = {}
        ym = solve_constrained_bvp(
            p.k, p.r, mu, _forcing(p.r, nu, y, m),
            (("value", 0.0), ("flux", _flux(p.kappa, z[m - 1], 0))),
            weight=p.r, ortho_to=y[0], interval=(p.a, 0.0), tol=tol, nodes=y[0].nodes, info=info,
        )
        log.append(info["solvability"])
        zm = solve_constrained_bvp(
            p.kappa, p.rho, mu, _forcing(p.rho, nu, z, m),
            (("value", float(ym.u[-1])), ("value", 0.0)),
            interval=(0.0, p.b), tol=tol, nodes=z[0].nodes,
        )
        y.append(ym)
        z.append(zm)
    return ExpansionSeries(mode, Branch.Single, n, tuple(nu), tuple(y), tuple(z), solvability=tuple(log))


def expand_simple_A2(p: ProblemSpec, mode: LimitMode, n: int, tol: float = DEFAULT_TOL,
                     nu_offset: dict | None = None) -> ExpansionSeries:
    """Series in eps for a simple eigenvalue of the right Dirichlet operator."""
    if mode.kind is not Kind.SimpleA2:
        raise ValueError("mode is not SimpleA2")
    n = _check_order(n)
    mode = _ensure_built(p, mode)
    mu = mode.mu
    z = [mode.v]
    y = [FunctionTrace.zeros(p.a, 0.0)]
    kz00 = _flux(p.kappa, z[0], 0)
    nu, log = [], []
    for m in range(1, n + 1):
        ym = solve_constrained_bvp(
            p.k, p.r, mu, _forcing(p.r, nu, y, m),
            (("value", 0.0), ("flux", _flux(p.kappa, z[m - 1], 0))),
            interval=(p.a, 0.0), tol=tol, nodes=y[0].nodes,
        )
        nu.append(-kz00 * float(ym.u[-1]) + _offset(nu_offset, m))
        info = {}
        zm = solve_constrained_bvp(
            p.kappa, p.rho, mu, _forcing(p.rho, nu, z, m),
            (("value", float(ym.u[-1])), ("value", 0.0)),
            weight=p.rho, ortho_to=z[0], interval=(0.0, p.b), tol=tol, nodes=z[0].nodes, info=info,
        )
        log.append(info["solvability"])
        y.append(ym)
        z.append(zm)
    return ExpansionSeries(mode, Branch.Single, n, tuple(nu), tuple(y), tuple(z), exact_flag=mode.exact,
                           solvability=tuple(log))


def _double_branch(p, mode, n, sigma, tol, nu_offset):
    mu, w, v, omega = mode.mu, mode.w, mode.v, mode.omega
    w0 = float(w.u[-1])
    alpha, beta = [1.0], [-sigma]
    nu = [sigma * omega + _offset(nu_offset, 1)]
    vs = [v]  # completed v_m
    ws = [FunctionTrace.zeros(p.a, 0.0, w.nodes.size - 1), w * beta[0]]
    log = []
    for m in range(2, n + 2):
        info_v, info_w = {}, {}
        V = solve_constrained_bvp(
            p.kappa, p.rho, mu, _forcing(p.rho, nu, vs, m - 1),
            (("value", float(ws[m - 1].u[-1])), ("value", 0.0)),
            weight=p.rho, ortho_to=v, interval=(0.0, p.b), tol=tol, nodes=v.nodes, info=info_v,
        )
        W = solve_constrained_bvp(
            p.k, p.r, mu, _forcing(p.r, nu, ws, m),
            (("value", 0.0), ("flux", _flux(p.kappa, vs[m - 2], 0))),
            weight=p.r, ortho_to=w, interval=(p.a, 0.0), tol=tol, nodes=w.nodes, info=info_w,
        )
        log += [info_v["solvability"], info_w["solvability"]]
        s_alpha = sum(nu[j - 1] * alpha[m - j] for j in range(2, m))
        s_beta = sum(nu[j - 1] * beta[m - j] for j in range(2, m))
        A_v = -_flux(p.kappa, v, 0) * float(W.u[-1]) - s_alpha
        A_w = -_flux(p.kappa, V, 0) * w0 - s_beta
        num = 0.5 * (A_v - sigma * A_w)
        T = (A_v - num) / (2.0 * sigma * omega)
        alpha.append(T)
        beta.append(sigma * T)
        vs.append(V + v * T)
        ws.append(W + w * (sigma * T))
        nu.append(num + _offset(nu_offset, m))
    return nu[:n], ws[: n + 1], vs[: n + 1], alpha[: n + 1], beta[: n + 1], log


def expand_double(p: ProblemSpec, mode: LimitMode, n: int, tol: float = DEFAULT_TOL,
                  nu_offset: dict | None = None) -> tuple[ExpansionSeries, ExpansionSeries]:
    """(Plus, Minus) series in sqrt(eps); Plus has nu_1 = +omega."""
    if mode.kind is not Kind.Double:
        raise ValueError("mode is not Double")
    n = _check_order(n)
    mode = _ensure_built(p, mode)
    if mode.omega is None or abs(mode.omega) < 1e-10:
        raise SolvabilityError(0.0 if mode.omega is None else abs(mode.omega), 1.0)
    out = []
    for branch, sigma in ((Branch.Plus, 1.0), (Branch.Minus, -1.0)):
        off = nu_offset if branch is Branch.Plus else None
        nu, ws, vs, al, be, log = _double_branch(p, mode, n, sigma, tol, off)
        out.append(ExpansionSeries(mode, branch, n, tuple(nu), tuple(ws), tuple(vs),
                                   alpha=tuple(al), beta=tuple(be), solvability=tuple(log)))
    return out[0], out[1]


def expand(p: ProblemSpec, mode: LimitMode, n: int, tol: float = DEFAULT_TOL,
           nu_offset: dict | None = None) -> list[ExpansionSeries]:
    """All branches for a mode: [Single] or [Plus, Minus]."""
    if mode.kind is Kind.SimpleA1:
        return [expand_simple_A1(p, mode, n, tol, nu_offset)]
    if mode.kind is Kind.SimpleA2:
        return [expand_simple_A2(p, mode, n, tol, nu_offset)]
    return list(expand_double(p, mode, n, tol, nu_offset))


def corrector(p: ProblemSpec, nodes: np.ndarray) -> FunctionTrace:
    """phi(x) = x (x/a - 1) on [a, 0]: phi(a) = phi(0) = 0, phi'(0) = -1."""
    a = p.a
    return FunctionTrace(nodes, nodes * (nodes / a - 1.0), 2.0 * nodes / a - 1.0)


def partial_sum(series: ExpansionSeries, eps: float, p: ProblemSpec | None = None) -> PartialSum:
    """Lambda, U = sum t^m c_m, flux defect beta and the corrected V = U + (beta / k(0)) phi."""
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if p is None:
        raise ValueError("problem required")
    t = series.t(eps)
    powers = [t**m for m in range(len(series.left_coeffs))]
    UL = linear_combination(powers, series.left_coeffs)
    UR = linear_combination(powers, series.right_coeffs)
    beta = float(p.k(0.0) * UL.du[-1] - eps * p.kappa(0.0) * UR.du[0])
    VL = UL + corrector(p, UL.nodes) * (beta / float(p.k(0.0)))
    return PartialSum(eps, series.order, series.eigenvalue(eps), TracePair(UL, UR), TracePair(VL, UR),
                      beta, series)


def algebraic_residual(p: ProblemSpec, ps: PartialSum):
    """Cell averages of (K V')' + mu_L W V on each side, mu_L = Lambda / eps.

    The series part is the exact leftover sum over i + m > n of t^(i+m) nu_i R c_m; the
    corrector part is evaluated from flux differences.
    """
    s = ps.series
    t = s.t(ps.epsilon)
    n = len(s.nu)
    mu_l = ps.mu
    out = []
    for side, (q, coeffs) in enumerate(((p.r, s.left_coeffs), (p.rho, s.right_coeffs))):
        nodes = coeffs[0].nodes
        x, wq = gauss_points(nodes)
        acc = np.zeros_like(x)
        for i in range(1, n + 1):
            for m in range(len(coeffs)):
                if i + m > n:
                    acc += t ** (i + m) * s.nu[i - 1] * coeffs[m](x)
        acc *= q(x)
        h = np.diff(nodes)
        cell = (wq * acc).reshape(-1, 5).sum(axis=1) / h
        if side == 0 and ps.beta_resid != 0.0:
            c = ps.beta_resid / float(p.k(0.0))
            phi = corrector(p, nodes)
            F = p.k(nodes) * phi.du
            mass = (wq * q(x) * phi(x)).reshape(-1, 5).sum(axis=1)
            cell = cell + c * (np.diff(F) + mu_l * mass) / h
        out.append((nodes, cell))
    return out
