"""Limit spectrum as eps -> 0 and its root vectors.

The left operator A1 is (k y')' + mu r y = 0 with y(a) = 0, y'(0) = 0, the right operator
A2 is (kappa v')' + mu rho v = 0 with v(0) = v(b) = 0. Their union is the limit spectrum;
common points are double with a two-dimensional Jordan chain (U, U*).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .coeffs import ProblemSpec
from .ode import (
    DEFAULT_TOL,
    FunctionTrace,
    TracePair,
    default_grid,
    flux_at,
    inner,
    integrate_ivp,
    inner_derivative,
    prufer_angle,
    prufer_scale,
    solve_constrained_bvp,
)

ROOT_XTOL = 1e-14
ROOT_RTOL = 1e-15
PRUFER_TOL = 1e-13
CLUSTER_TOL = 1e-8
EXACT_TOL = 1e-10


class Kind(str, Enum):
    SimpleA1 = "SimpleA1"
    SimpleA2 = "SimpleA2"
    Double = "Double"


class LimitError(ArithmeticError):
    pass


@lru_cache(maxsize=65536)
def theta_left(p: ProblemSpec, mu: float, tol: float = PRUFER_TOL) -> float:
    """Pruefer angle at x=0- of the left solution with y(a)=0; independent of eps."""
    S = prufer_scale(p.k, p.r, mu, p.a, 0.0)
    return prufer_angle(p.k, p.r, mu, p.a, 0.0, 0.0, S, tol)


@lru_cache(maxsize=65536)
def theta_right_dirichlet(p: ProblemSpec, mu: float, tol: float = PRUFER_TOL) -> float:
    S = prufer_scale(p.kappa, p.rho, mu, 0.0, p.b)
    return prufer_angle(p.kappa, p.rho, mu, 0.0, p.b, 0.0, S, tol)


def count_A1(p: ProblemSpec, mu: float) -> int:
    """Number of A1 eigenvalues below mu."""
    return int(math.floor(theta_left(p, mu) / math.pi + 0.5))


def count_A2(p: ProblemSpec, mu: float) -> int:
    return int(math.floor(theta_right_dirichlet(p, mu) / math.pi))


def _root_by_angle(fn, target: float, lo: float, hi: float) -> float:
    while fn(hi) <= target:
        lo, hi = hi, 2.0 * hi
    return brentq(lambda m: fn(m) - target, lo, hi, xtol=ROOT_XTOL, rtol=ROOT_RTOL, maxiter=200)


def _initial_hi(p: ProblemSpec) -> float:
    return (math.pi / (p.b - p.a)) ** 2


def spectrum_A1(p: ProblemSpec, mu_max: float) -> list[float]:
    """All A1 eigenvalues <= mu_max."""
    n = count_A1(p, mu_max)
    out, lo = [], 0.0
    for j in range(1, n + 1):
        m = _root_by_angle(lambda x: theta_left(p, x), (j - 0.5) * math.pi, lo, mu_max)
        out.append(m)
        lo = m
    return out


def spectrum_A2hat(p: ProblemSpec, mu_max: float) -> list[float]:
    """All Dirichlet eigenvalues <= mu_max of the right problem."""
    n = count_A2(p, mu_max)
    out, lo = [], 0.0
    for j in range(1, n + 1):
        m = _root_by_angle(lambda x: theta_right_dirichlet(p, x), j * math.pi, lo, mu_max)
        out.append(m)
        lo = m
    return out


def limit_window(p: ProblemSpec, count: int) -> float:
    """A mu_max enclosing at least `count` limit eigenvalues counted with multiplicity."""
    hi = _initial_hi(p)
    while count_A1(p, hi) + count_A2(p, hi) < count:
        hi *= 2.0
    return hi


@lru_cache(maxsize=256)
def dirichlet_eigenvalues(p: ProblemSpec, count: int) -> tuple[float, ...]:
    """First `count` eigenvalues of the right Dirichlet problem."""
    out, lo = [], 0.0
    hi = (math.pi / p.b) ** 2
    for j in range(1, count + 1):
        m = _root_by_angle(lambda x: theta_right_dirichlet(p, x), j * math.pi, lo, max(hi, 2.0 * lo))
        out.append(m)
        lo = m
    return tuple(out)


@lru_cache(maxsize=256)
def limit_eigenvalues(p: ProblemSpec, count: int) -> tuple[float, ...]:
    """First `count` limit eigenvalues with multiplicity, ascending."""
    hi = limit_window(p, count)
    vals = sorted(spectrum_A1(p, hi) + spectrum_A2hat(p, hi))
    return tuple(vals[:count])


@dataclass(frozen=True)
class LimitMode:
    mu: float
    kind: Kind
    w: FunctionTrace | None = None
    v: FunctionTrace | None = None
    U: TracePair | None = None
    Ustar: TracePair | None = None
    omega: float | None = None
    exact: bool = False
    jordan_ratio: float | None = None
    mu_a1: float | None = None
    mu_a2: float | None = None


@dataclass(frozen=True)
class LimitSpectrum:
    modes: tuple[LimitMode, ...]

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    def __iter__(self):
        return iter(self.modes)

    @property
    def mus(self) -> list[float]:
        return [m.mu for m in self.modes]

    def distinct(self) -> list[tuple[int, LimitMode]]:
        """(first 1-based index, mode) for each distinct point."""
        out, seen = [], set()
        for i, m in enumerate(self.modes, start=1):
            if id(m) not in seen:
                seen.add(id(m))
                out.append((i, m))
        return out


def classify(sa1, sa2, cluster_tol: float = CLUSTER_TOL) -> LimitSpectrum:
    """Merge the two spectra; near-coincident pairs become Double and occupy two slots."""
    sa1, sa2 = sorted(sa1), sorted(sa2)
    modes = []
    i = j = 0
    while i < len(sa1) or j < len(sa2):
        if i < len(sa1) and j < len(sa2) and abs(sa1[i] - sa2[j]) <= cluster_tol * (1.0 + sa2[j]):
            m = LimitMode(0.5 * (sa1[i] + sa2[j]), Kind.Double, mu_a1=sa1[i], mu_a2=sa2[j])
            modes.extend([m, m])
            i += 1
            j += 1
        elif j >= len(sa2) or (i < len(sa1) and sa1[i] < sa2[j]):
            modes.append(LimitMode(sa1[i], Kind.SimpleA1, mu_a1=sa1[i]))
            i += 1
        else:
            modes.append(LimitMode(sa2[j], Kind.SimpleA2, mu_a2=sa2[j]))
            j += 1
    return LimitSpectrum(tuple(modes))


def _left_grid(p: ProblemSpec, mu: float) -> np.ndarray:
    return default_grid(p.a, 0.0, math.sqrt(mu * float(np.max(p.r(np.linspace(p.a, 0, 33)) / p.k(np.linspace(p.a, 0, 33))))))


def _right_grid(p: ProblemSpec, mu: float) -> np.ndarray:
    xs = np.linspace(0, p.b, 33)
    return default_grid(0.0, p.b, math.sqrt(mu * float(np.max(p.rho(xs) / p.kappa(xs)))))


def a1_eigenfunction(p: ProblemSpec, mu: float, tol: float = DEFAULT_TOL) -> FunctionTrace:
    """w with int r w^2 = 1 and w(0) > 0."""
    w = integrate_ivp(p.k, p.r, mu, p.a, 0.0, 0.0, 1.0, tol, _left_grid(p, mu))
    n = math.sqrt(inner(w, w, p.r))
    return w * (math.copysign(1.0, w.u[-1]) / n)


def a2_eigenfunction(p: ProblemSpec, mu: float, tol: float = DEFAULT_TOL) -> FunctionTrace:
    """v with int rho v^2 = 1 and v'(0) > 0."""
    v = integrate_ivp(p.kappa, p.rho, mu, 0.0, p.b, 0.0, 1.0, tol, _right_grid(p, mu))
    return v / math.sqrt(inner(v, v, p.rho))


def intertwine(p: ProblemSpec, mu: float, value0: float, nodes=None, tol: float = DEFAULT_TOL) -> FunctionTrace:
    """Solution of the right equation with z(0) = value0, z(b) = 0 (mu off the right spectrum)."""
    return solve_constrained_bvp(p.kappa, p.rho, mu, None, (("value", value0), ("value", 0.0)),
                                 interval=(0.0, p.b), tol=tol, nodes=nodes)


def limit_eigenfunction(p: ProblemSpec, mode: LimitMode, tol: float = DEFAULT_TOL) -> LimitMode:
    mu = mode.mu
    if mode.kind is Kind.SimpleA1:
        w = a1_eigenfunction(p, mu, tol)
        w0 = float(w.u[-1])
        z0 = intertwine(p, mu, w0, _right_grid(p, mu), tol)
        flux = flux_at(z0, p.kappa, 0.0)
        scale = max(1.0, abs(w0) * math.sqrt(mu * float(p.kappa(0.0) * p.rho(0.0))))
        return replace(mode, w=w, U=TracePair(w, z0), exact=abs(flux) <= EXACT_TOL * scale)
    v = a2_eigenfunction(p, mu, tol)
    zero = FunctionTrace.zeros(p.a, 0.0)
    mode = replace(mode, v=v, U=TracePair(zero, v))
    if mode.kind is Kind.SimpleA2:
        # mu also a left Dirichlet eigenvalue: the left corrector vanishes at 0 and every nu_m is 0
        y = integrate_ivp(p.k, p.r, mu, p.a, 0.0, 0.0, 1.0, tol, _left_grid(p, mu))
        mode = replace(mode, exact=abs(float(y.u[-1])) <= EXACT_TOL * float(np.max(np.abs(y.u))))
    if mode.kind is Kind.Double:
        mode = replace(mode, w=a1_eigenfunction(p, mu, tol))
    return mode


def adjoined_vector(p: ProblemSpec, mode: LimitMode, tol: float = DEFAULT_TOL) -> LimitMode:
    """U* with (A - mu) U* = U and (U, U*) = 0 in L2(R); omega = (kappa w v')(0)."""
    if mode.kind is not Kind.Double:
        raise LimitError("adjoined vector exists only for a double point")
    if mode.w is None or mode.v is None:
        mode = limit_eigenfunction(p, mode, tol)
    w, v, mu = mode.w, mode.v, mode.mu
    w0 = float(w.u[-1])
    dv0 = float(v.du[0])
    if abs(w0) < 1e-10 or abs(dv0) < 1e-10:
        raise LimitError(f"degenerate coupling: w(0)={w0:.3e}, v'(0)={dv0:.3e}")
    omega = float(p.kappa(0.0)) * w0 * dv0
    v1 = w * (-1.0 / omega)
    rho_s, fs = p.rho.scalar, v.scalar
    v2 = solve_constrained_bvp(
        p.kappa, p.rho, mu, lambda x: -rho_s(x) * fs(x),
        (("value", float(v1.u[-1])), ("value", 0.0)),
        weight=p.rho, ortho_to=v, interval=(0.0, p.b), tol=tol, nodes=v.nodes,
    )
    ratio = inner_derivative(v2, v, p.kappa) - mu * inner(v2, v, p.rho)
    return replace(mode, Ustar=TracePair(v1, v2), omega=omega, jordan_ratio=ratio)


def build_mode(p: ProblemSpec, mode: LimitMode, tol: float = DEFAULT_TOL) -> LimitMode:
    mode = limit_eigenfunction(p, mode, tol)
    if mode.kind is Kind.Double:
        mode = adjoined_vector(p, mode, tol)
    return mode


def limit_spectrum(p: ProblemSpec, count: int | None = None, mu_max: float | None = None,
                   cluster_tol: float = CLUSTER_TOL, functions: bool = True) -> LimitSpectrum:
    """Classified limit spectrum, either the first `count` slots or everything up to mu_max."""
    if (count is None) == (mu_max is None):
        raise ValueError("give exactly one of count, mu_max")
    hi = limit_window(p, count + 1) if count is not None else mu_max
    spec = classify(spectrum_A1(p, hi), spectrum_A2hat(p, hi), cluster_tol)
    modes = list(spec.modes)
    if count is not None:
        modes = modes[:count]
    if functions:
        built = {}
        for m in modes:
            if id(m) not in built:
                built[id(m)] = build_mode(p, m)
        modes = [built[id(m)] for m in modes]
    return LimitSpectrum(tuple(modes))


def mode_at(p: ProblemSpec, index: int, cluster_tol: float = CLUSTER_TOL) -> LimitMode:
    """Fully built limit mode occupying 1-based slot `index`."""
    spec = limit_spectrum(p, count=index, cluster_tol=cluster_tol, functions=False)
    return build_mode(p, spec[index - 1])


def slots_of(spec: LimitSpectrum, mode: LimitMode) -> list[int]:
    """1-based slots occupied by a mode."""
    return [i for i, m in enumerate(spec, start=1) if m.mu == mode.mu and m.kind == mode.kind]
