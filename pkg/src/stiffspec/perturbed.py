"""Eigenpairs of the transmission problem at fixed eps.

In the variable mu = lambda / eps both equations are eps-free::

    (k u')' + mu r u = 0 on (a,0),   (kappa u')' + mu rho u = 0 on (0,b),
    u(-0) = u(+0),   (k u')(-0) = eps (kappa u')(+0),   u(a) = u(b) = 0.

Eigenvalue j is the root of Theta(mu) = j*pi, where Theta is the Pruefer angle carried
from a through the interface to b. Theta increases with mu, which makes indexing exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .coeffs import ProblemSpec
from .limit import PRUFER_TOL, dirichlet_eigenvalues, theta_left
from .ode import (
    DEFAULT_TOL,
    FunctionTrace,
    TracePair,
    default_grid,
    inner,
    inner_derivative,
    integrate_ivp,
    prufer_angle,
    prufer_scale,
    shoot,
)


class EigenError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EigenPair:
    j: int
    epsilon: float
    lam: float
    mu: float
    left: FunctionTrace | None = field(default=None, repr=False)
    right: FunctionTrace | None = field(default=None, repr=False)

    @property
    def pair(self) -> TracePair:
        return TracePair(self.left, self.right)


@dataclass(frozen=True)
class WeightedMetric:
    """(f, g)_eps = eps^-1 int r f g + int rho f g; energy <f, g>_eps = int k f'g' + eps int kappa f'g'."""

    epsilon: float

    def inner(self, p: ProblemSpec, t1: TracePair, t2: TracePair) -> float:
        return inner(t1.left, t2.left, p.r) / self.epsilon + inner(t1.right, t2.right, p.rho)

    def norm(self, p: ProblemSpec, t: TracePair) -> float:
        return math.sqrt(max(self.inner(p, t, t), 0.0))

    def energy(self, p: ProblemSpec, t1: TracePair, t2: TracePair) -> float:
        return inner_derivative(t1.left, t2.left, p.k) + self.epsilon * inner_derivative(t1.right, t2.right, p.kappa)


def inner_eps(m: WeightedMetric, p: ProblemSpec, t1: TracePair, t2: TracePair) -> float:
    return m.inner(p, t1, t2)


def inner_R(p: ProblemSpec, t1: TracePair, t2: TracePair) -> float:
    """L2 inner product with the piecewise density R."""
    return inner(t1.left, t2.left, p.r) + inner(t1.right, t2.right, p.rho)


def inner_plain(t1: TracePair, t2: TracePair) -> float:
    return inner(t1.left, t2.left) + inner(t1.right, t2.right)


def _check_eps(eps: float):
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"eps must lie in (0, 1], got {eps}")


def characteristic(p: ProblemSpec, eps: float, mu: float, tol: float = DEFAULT_TOL) -> float:
    """D(mu) = (k y')(0) z(0) - eps (kappa z')(0) y(0) from the two one-sided shots."""
    _check_eps(eps)
    yl, Fl = shoot(p.k, p.r, mu, p.a, 0.0, 0.0, 1.0, tol)
    zr, Fr = shoot(p.kappa, p.rho, mu, p.b, 0.0, 0.0, -1.0, tol)
    return Fl * zr - eps * Fr * yl


def total_angle(p: ProblemSpec, eps: float, mu: float, tol: float = PRUFER_TOL) -> float:
    """Pruefer angle at b for the solution with u(a) = 0, carried across the interface."""
    th = theta_left(p, mu, tol)
    SL = prufer_scale(p.k, p.r, mu, p.a, 0.0)
    SR = prufer_scale(p.kappa, p.rho, mu, 0.0, p.b)
    m = math.floor(th / math.pi)
    psi = th - m * math.pi
    # tan(psi_R) = SR u / (kappa u') = eps (SR / SL) tan(psi_L); same branch
    psi_r = math.atan2(eps * SR * math.sin(psi), SL * math.cos(psi))
    return prufer_angle(p.kappa, p.rho, mu, 0.0, p.b, m * math.pi + psi_r, SR, tol)


def dirichlet_bounds(p: ProblemSpec, count: int) -> tuple[float, ...]:
    """mu_j(eps) <= j-th Dirichlet eigenvalue of the right problem (min-max with functions vanishing on the left)."""
    return dirichlet_eigenvalues(p, count)


@lru_cache(maxsize=1024)
def _eigenvalues(p: ProblemSpec, eps: float, count: int, tol: float) -> tuple[float, ...]:
    upper = dirichlet_bounds(p, count)
    out = []
    lo = 1e-3 * upper[0]
    for j in range(1, count + 1):
        target = j * math.pi
        hi = upper[j - 1] * (1.0 + 1e-10) + 1e-300
        fhi = total_angle(p, eps, hi, tol) - target
        while fhi <= 0:  # guard against round-off at equality
            hi *= 1.01
            fhi = total_angle(p, eps, hi, tol) - target
        flo = total_angle(p, eps, lo, tol) - target
        if flo >= 0:
            raise EigenError(f"bracket for j={j} lost at eps={eps}: Theta(lo)={flo + target:.6g}")
        mu = brentq(lambda m: total_angle(p, eps, m, tol) - target, lo, hi,
                    xtol=1e-15 * hi, rtol=1e-15, maxiter=300)
        out.append(mu)
        lo = mu
    return tuple(out)


def eigenvalues(p: ProblemSpec, eps: float, count: int, tol: float = PRUFER_TOL) -> list[EigenPair]:
    """First `count` eigenvalues, strictly increasing, without eigenfunctions."""
    _check_eps(eps)
    if count < 1:
        raise ValueError("count must be >= 1")
    mus = _eigenvalues(p, float(eps), int(count), float(tol))
    return [EigenPair(j, eps, eps * m, m) for j, m in enumerate(mus, start=1)]


def eigenvalue(p: ProblemSpec, eps: float, j: int) -> float:
    """mu_j(eps) = lambda_j / eps."""
    return eigenvalues(p, eps, j)[-1].mu


def _grid(lo, hi, mu, c1, c2):
    xs = np.linspace(lo, hi, 33)
    return default_grid(lo, hi, math.sqrt(mu * float(np.max(c2(xs) / c1(xs)))))


def eigenfunction(p: ProblemSpec, eps: float, pair: EigenPair, tol: float = DEFAULT_TOL) -> EigenPair:
    """Traces matched at 0, normalized by int R u^2 = 1 with u'(b) > 0."""
    mu = pair.mu
    y = integrate_ivp(p.k, p.r, mu, p.a, 0.0, 0.0, 1.0, tol, _grid(p.a, 0.0, mu, p.k, p.r))
    z = integrate_ivp(p.kappa, p.rho, mu, p.b, 0.0, 0.0, -1.0, tol, _grid(0.0, p.b, mu, p.kappa, p.rho))
    ly = np.array([y.u[-1], p.k(0.0) * y.du[-1]])
    rz = np.array([z.u[0], eps * p.kappa(0.0) * z.du[0]])
    if np.linalg.norm(ly) < 1e-300 or np.linalg.norm(rz) < 1e-300:
        raise EigenError("degenerate matching at the interface")
    # scale left so that its (u, k u') agrees with the right's (u, eps kappa u') at 0
    A = float(np.dot(ly, rz) / np.dot(ly, ly))
    left, right = y * A, z
    nrm = math.sqrt(inner(left, left, p.r) + inner(right, right, p.rho))
    # z'(b) = -1/kappa(b) < 0 before the sign flip
    left, right = left * (-1.0 / nrm), right * (-1.0 / nrm)
    out = replace(pair, left=left, right=right)
    zeros = node_count(out)
    if zeros != pair.j - 1:
        raise EigenError(f"eigenfunction {pair.j} has {zeros} interior zeros, expected {pair.j - 1}")
    return out


def node_count(pair: EigenPair) -> int:
    vals = np.concatenate([pair.left.u, pair.right.u[1:]])
    tiny = 1e-9 * float(np.max(np.abs(vals)))
    s = np.sign(vals[np.abs(vals) > tiny])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def eigenpairs(p: ProblemSpec, eps: float, count: int, tol: float = DEFAULT_TOL) -> list[EigenPair]:
    return [eigenfunction(p, eps, e, tol) for e in eigenvalues(p, eps, count)]


def eigenpair(p: ProblemSpec, eps: float, j: int, tol: float = DEFAULT_TOL) -> EigenPair:
    return eigenfunction(p, eps, eigenvalues(p, eps, j)[-1], tol)


def constant_case_roots(a: float, b: float, eps: float, count: int) -> list[float]:
    """Positive roots omega of cos(w a) sin(w b) = eps sin(w a) cos(w b), with multiplicity at eps=0."""
    if eps == 0:
        cands = []
        n = 1
        while len(cands) < 2 * count + 2:
            cands.append((n - 0.5) * math.pi / abs(a))
            cands.append(n * math.pi / b)
            n += 1
        return sorted(cands)[:count]

    def g(w):
        return np.cos(w * a) * np.sin(w * b) - eps * np.sin(w * a) * np.cos(w * b)

    step = min(0.01, 0.2 * math.sqrt(eps)) / max(abs(a), b)
    roots = []
    w0 = step * 1e-3
    chunk = 20000
    while len(roots) < count:
        ws = w0 + step * np.arange(chunk + 1)
        gs = g(ws)
        idx = np.nonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) <= 0)[0]
        for i in idx:
            if gs[i] == 0:
                r = float(ws[i])
            elif gs[i + 1] == 0:
                continue
            else:
                r = brentq(lambda w: float(g(w)), ws[i], ws[i + 1], xtol=1e-15, rtol=1e-15)
            if not roots or r - roots[-1] > 1e-13:
                roots.append(r)
            if len(roots) == count:
                break
        w0 = float(ws[-1])
    return roots


def constant_case_eigenvalue_pair(eps: float) -> tuple[float, float]:
    """Closed-form bifurcating pair mu_{1,2} for a=-1, b=2 with unit coefficients."""
    s = math.asin(math.sqrt(eps / (2.0 + 2.0 * eps)))
    return ((math.pi / 2 - s) ** 2, (math.pi / 2 + s) ** 2)


def minmax_lower(p: ProblemSpec, eps: float, samples: int = 1000) -> float:
    """(k_*/r_*) omega^2 with omega the first constant-coefficient root on (a,b); a bound for mu_j."""
    xl = np.linspace(p.a, 0.0, samples)
    xr = np.linspace(0.0, p.b, samples)
    kmin = min(float(np.min(p.k(xl))), float(np.min(p.kappa(xr))))
    rmax = max(float(np.max(p.r(xl))), float(np.max(p.rho(xr))))
    w1 = constant_case_roots(p.a, p.b, eps, 1)[0]
    return kmin / rmax * w1 * w1
