"""Initial-value solver for (p u')' + mu q u = f, trace arithmetic and quadrature.

The state is (u, F) with F = p u', so interface fluxes are read off directly.
Integration uses scipy's DOP853 with dense output; the result is resampled on a
uniform grid and stored as a cubic Hermite trace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate as _si

DEFAULT_TOL = 1e-12
MIN_TOL = 2.3e-14  # scipy refuses rtol below 100 * machine epsilon
BASE_DENSITY = 2048  # nodes per unit length


class IntegrationError(RuntimeError):
    pass


class QuadratureError(RuntimeError):
    pass


class SolvabilityError(ArithmeticError):
    """A resonant boundary-value problem whose forcing is not orthogonal to the kernel."""

    def __init__(self, residual: float, scale: float):
        self.residual = residual
        self.scale = scale
        super().__init__(f"solvability residual {residual:.3e} exceeds tolerance (scale {scale:.3e})")


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(5)


class FunctionTrace:
    """Values and first derivatives at increasing nodes, cubic Hermite in between."""

    __slots__ = ("nodes", "u", "du", "_h")

    def __init__(self, nodes, u, du):
        nodes = np.asarray(nodes, dtype=float)
        u = np.asarray(u, dtype=float)
        du = np.asarray(du, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or u.shape != nodes.shape or du.shape != nodes.shape:
            raise ValueError("nodes, u and du must be 1-d arrays of equal length >= 2")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("nodes must be strictly increasing")
        self.nodes, self.u, self.du = nodes, u, du
        h = (nodes[-1] - nodes[0]) / (nodes.size - 1)
        uniform = np.allclose(np.diff(nodes), h, rtol=1e-9, atol=0)
        self._h = h if uniform else None

    @classmethod
    def zeros(cls, lo: float, hi: float, n: int | None = None) -> "FunctionTrace":
        nodes = default_grid(lo, hi) if n is None else np.linspace(lo, hi, n + 1)
        z = np.zeros_like(nodes)
        return cls(nodes, z, z.copy())

    @classmethod
    def sample(cls, f, df, lo: float, hi: float, n: int | None = None) -> "FunctionTrace":
        """Trace of a known function given vectorized f and f'."""
        nodes = default_grid(lo, hi) if n is None else np.linspace(lo, hi, n + 1)
        return cls(nodes, np.broadcast_to(f(nodes), nodes.shape), np.broadcast_to(df(nodes), nodes.shape))

    @property
    def interval(self) -> tuple[float, float]:
        return (float(self.nodes[0]), float(self.nodes[-1]))

    @property
    def lo(self) -> float:
        return float(self.nodes[0])

    @property
    def hi(self) -> float:
        return float(self.nodes[-1])

    def _locate(self, x):
        if self._h is not None:
            i = np.floor((x - self.nodes[0]) / self._h).astype(int)
        else:
            i = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(i, 0, self.nodes.size - 2)

    def _basis(self, x):
        x = np.asarray(x, dtype=float)
        i = self._locate(x)
        x0 = self.nodes[i]
        h = self.nodes[i + 1] - x0
        t = (x - x0) / h
        return i, h, t

    def __call__(self, x):
        i, h, t = self._basis(x)
        t2 = t * t
        t3 = t2 * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        out = h00 * self.u[i] + h10 * h * self.du[i] + h01 * self.u[i + 1] + h11 * h * self.du[i + 1]
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, x):
        i, h, t = self._basis(x)
        t2 = t * t
        d00 = (6 * t2 - 6 * t) / h
        d10 = 3 * t2 - 4 * t + 1
        d01 = (-6 * t2 + 6 * t) / h
        d11 = 3 * t2 - 2 * t
        out = d00 * self.u[i] + d10 * self.du[i] + d01 * self.u[i + 1] + d11 * self.du[i + 1]
        return float(out) if np.ndim(out) == 0 else out

    def second_derivative_nodes(self) -> np.ndarray:
        """u'' at the nodes, by differencing the stored slopes."""
        return np.gradient(self.du, self.nodes, edge_order=2)

    def scalar(self, x: float) -> float:
        """Fast single-point evaluation for ODE right-hand sides."""
        nodes = self.nodes
        if self._h is not None:
            i = int((x - nodes[0]) / self._h)
        else:
            i = int(np.searchsorted(nodes, x, side="right")) - 1
        i = min(max(i, 0), nodes.size - 2)
        x0 = nodes[i]
        h = nodes[i + 1] - x0
        t = (x - x0) / h
        t2 = t * t
        t3 = t2 * t
        return ((2 * t3 - 3 * t2 + 1) * self.u[i] + (t3 - 2 * t2 + t) * h * self.du[i]
                + (3 * t2 - 2 * t3) * self.u[i + 1] + (t3 - t2) * h * self.du[i + 1])

    def at(self, x: float) -> float:
        return float(self(x))

    def __neg__(self):
        return FunctionTrace(self.nodes, -self.u, -self.du)

    def __mul__(self, c):
        c = float(c)
        return FunctionTrace(self.nodes, c * self.u, c * self.du)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def __add__(self, other):
        return trace_combine(1.0, self, 1.0, other)

    def __sub__(self, other):
        return trace_combine(1.0, self, -1.0, other)

    def sup(self) -> float:
        return float(np.max(np.abs(self.u)))

    def sign_changes(self) -> int:
        """Number of interior sign changes of the node values, ignoring tiny values at the ends."""
        u = self.u
        tiny = 1e-9 * max(float(np.max(np.abs(u))), 1e-300)
        s = np.sign(u[np.abs(u) > tiny])
        return int(np.count_nonzero(s[1:] != s[:-1]))

    def __repr__(self):
        return f"FunctionTrace([{self.lo:g}, {self.hi:g}], {self.nodes.size} nodes)"


@dataclass(frozen=True)
class TracePair:
    """A function on (a,0) U (0,b) given by its two one-sided traces."""

    left: FunctionTrace
    right: FunctionTrace

    def __add__(self, other):
        return TracePair(self.left + other.left, self.right + other.right)

    def __sub__(self, other):
        return TracePair(self.left - other.left, self.right - other.right)

    def __mul__(self, c):
        return TracePair(self.left * c, self.right * c)

    __rmul__ = __mul__

    def __neg__(self):
        return TracePair(-self.left, -self.right)

    def __truediv__(self, c):
        return self * (1.0 / float(c))


def default_grid(lo: float, hi: float, frequency: float = 0.0) -> np.ndarray:
    length = abs(hi - lo)
    n = int(math.ceil(length * max(BASE_DENSITY, 250.0 * frequency)))
    return np.linspace(lo, hi, max(n, 8) + 1)


def _merge(t1: FunctionTrace, t2: FunctionTrace) -> np.ndarray:
    if t1.nodes is t2.nodes or (t1.nodes.size == t2.nodes.size and np.array_equal(t1.nodes, t2.nodes)):
        return t1.nodes
    return np.union1d(t1.nodes, t2.nodes)


def trace_combine(alpha: float, t1: FunctionTrace, beta: float, t2: FunctionTrace) -> FunctionTrace:
    """alpha*t1 + beta*t2 on the merged node set (exact for piecewise cubics)."""
    tol = 1e-12 * max(1.0, abs(t1.lo), abs(t1.hi))
    if abs(t1.lo - t2.lo) > tol or abs(t1.hi - t2.hi) > tol:
        raise ValueError(f"interval mismatch: {t1.interval} vs {t2.interval}")
    nodes = _merge(t1, t2)
    if nodes is t1.nodes:
        return FunctionTrace(nodes, alpha * t1.u + beta * t2.u, alpha * t1.du + beta * t2.du)
    return FunctionTrace(
        nodes,
        alpha * t1(nodes) + beta * t2(nodes),
        alpha * t1.derivative(nodes) + beta * t2.derivative(nodes),
    )


def linear_combination(coeffs, traces) -> FunctionTrace:
    out = None
    for c, t in zip(coeffs, traces):
        out = t * c if out is None else trace_combine(1.0, out, c, t)
    return out


def gauss_points(nodes: np.ndarray):
    """Five-point Gauss nodes and weights on every cell, flattened."""
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    half = 0.5 * (nodes[1:] - nodes[:-1])
    x = (mid[:, None] + half[:, None] * _GAUSS_X[None, :]).ravel()
    w = (half[:, None] * _GAUSS_W[None, :]).ravel()
    return x, w


def integrate_trace(t: FunctionTrace, weight=None, other: FunctionTrace | None = None, power: int = 1) -> float:
    """Integral of weight * t^power (or weight * t * other)."""
    nodes = t.nodes if other is None else _merge(t, other)
    x, w = gauss_points(nodes)
    vals = t(x)
    if other is not None:
        vals = vals * other(x)
    elif power != 1:
        vals = vals**power
    if weight is not None:
        vals = vals * weight(x)
    return float(np.dot(w, vals))


def inner(t1: FunctionTrace, t2: FunctionTrace, weight=None) -> float:
    """Integral of weight * t1 * t2 over the common interval."""
    return integrate_trace(t1, weight, other=t2)


def inner_derivative(t1: FunctionTrace, t2: FunctionTrace, weight=None) -> float:
    nodes = _merge(t1, t2)
    x, w = gauss_points(nodes)
    vals = t1.derivative(x) * t2.derivative(x)
    if weight is not None:
        vals = vals * weight(x)
    return float(np.dot(w, vals))


def quad(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Adaptive quadrature; error bound tol * (1 + |result|) or QuadratureError."""
    val, err = _si.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=500)
    if err > tol * (1.0 + abs(val)):
        raise QuadratureError(f"quadrature error estimate {err:.3e} above {tol:.1e}")
    return float(val)


def _tolerances(tol: float):
    if not (1e-14 <= tol <= 1e-6):
        raise ValueError(f"tol {tol} outside [1e-14, 1e-6]")
    return max(tol, MIN_TOL)


def _rhs(p, q, mu, f):
    ps, qs = p.scalar, q.scalar
    if f is None:
        def rhs(x, y):
            return (y[1] / ps(x), -mu * qs(x) * y[0])
    else:
        fs = getattr(f, "scalar", f)

        def rhs(x, y):
            return (y[1] / ps(x), -mu * qs(x) * y[0] + fs(x))
    return rhs


def _solve(p, q, mu, x0, x1, u0, pu0, f, tol, dense):
    rtol = _tolerances(tol)
    scale = max(abs(u0), abs(pu0), 1.0)
    sol = _si.solve_ivp(
        _rhs(p, q, mu, f),
        (x0, x1),
        (u0, pu0),
        method="DOP853",
        rtol=rtol,
        atol=rtol * scale,
        dense_output=dense,
    )
    if sol.status != 0:
        raise IntegrationError(sol.message)
    return sol


def _frequency(p, q, mu, lo, hi):
    xs = np.linspace(lo, hi, 33)
    return math.sqrt(max(mu, 0.0) * float(np.max(q(xs) / p(xs))))


def _to_trace(sol, p, q, mu, x0, x1, nodes=None) -> FunctionTrace:
    lo, hi = min(x0, x1), max(x0, x1)
    if nodes is None:
        nodes = default_grid(lo, hi, _frequency(p, q, mu, lo, hi))
    y = sol.sol(nodes)
    # pin the endpoints to the integrator's own values
    y[:, 0 if x0 <= x1 else -1] = sol.y[:, 0]
    y[:, -1 if x0 <= x1 else 0] = sol.y[:, -1]
    return FunctionTrace(nodes, y[0], y[1] / p(nodes))


def integrate_ivp(p, q, mu, x_from, x_to, u0, pu0, tol=DEFAULT_TOL, nodes=None) -> FunctionTrace:
    """Trace of (p u')' + mu q u = 0 with u(x_from)=u0, (p u')(x_from)=pu0."""
    sol = _solve(p, q, mu, float(x_from), float(x_to), float(u0), float(pu0), None, tol, True)
    return _to_trace(sol, p, q, mu, x_from, x_to, nodes)


def integrate_ivp_forced(p, q, mu, x_from, x_to, u0, pu0, f, tol=DEFAULT_TOL, nodes=None) -> FunctionTrace:
    """As integrate_ivp with right-hand side f (a trace or scalar callable)."""
    sol = _solve(p, q, mu, float(x_from), float(x_to), float(u0), float(pu0), f, tol, True)
    if nodes is None and isinstance(f, FunctionTrace):
        nodes = f.nodes
    return _to_trace(sol, p, q, mu, x_from, x_to, nodes)


def shoot(p, q, mu, x_from, x_to, u0, pu0, tol=DEFAULT_TOL, f=None) -> tuple[float, float]:
    """Endpoint (u, p u') only."""
    sol = _solve(p, q, mu, float(x_from), float(x_to), float(u0), float(pu0), f, tol, False)
    return float(sol.y[0, -1]), float(sol.y[1, -1])


def prufer_scale(p, q, mu, lo, hi) -> float:
    """Scale S for the modified Pruefer angle, tan(theta) = S u / (p u')."""
    xs = np.linspace(lo, hi, 17)
    pq = float(np.mean(np.sqrt(p(xs) * q(xs))))
    return pq * math.sqrt(max(mu, 1.0 / (hi - lo) ** 2))


def prufer_angle(p, q, mu, x_from, x_to, theta0, scale, tol=DEFAULT_TOL) -> float:
    """Modified Pruefer angle carried from x_from to x_to (x_from < x_to)."""
    rtol = _tolerances(tol)
    ps, qs = p.scalar, q.scalar
    S = float(scale)
    mS = mu / S

    def rhs(x, y):
        c = math.cos(y[0])
        s = math.sin(y[0])
        return (S * c * c / ps(x) + mS * qs(x) * s * s,)

    sol = _si.solve_ivp(rhs, (float(x_from), float(x_to)), (float(theta0),), method="DOP853",
                        rtol=rtol, atol=rtol)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    return float(sol.y[0, -1])


# ---------------------------------------------------------------- boundary-value problems

def _apply_bc(kind: str, u: float, F: float) -> float:
    if kind == "value":
        return u
    if kind == "flux":
        return F
    raise ValueError(f"unknown boundary condition kind {kind!r}")


@lru_cache(maxsize=512)
def _fundamental(p, q, mu, lo, hi, tol, n):
    nodes = np.linspace(lo, hi, n + 1)
    phi1 = integrate_ivp(p, q, mu, lo, hi, 1.0, 0.0, tol, nodes)
    phi2 = integrate_ivp(p, q, mu, lo, hi, 0.0, 1.0, tol, nodes)
    return phi1, phi2


def flux_at(t: FunctionTrace, p, x: float) -> float:
    return float(p(x) * t.derivative(x))


def solve_constrained_bvp(p, q, mu, f, bc, weight=None, ortho_to=None, interval=None,
                          tol=DEFAULT_TOL, solv_tol=1e-8, nodes=None, info=None):
    """Solve (p u')' + mu q u = f on [lo, hi] with bc = ((kind, value) at lo, (kind, value) at hi).

    kind is 'value' (u) or 'flux' (p u'). With ``ortho_to`` the problem is treated as
    resonant: the kernel direction is dropped, the solvability residual is checked, and
    the result is made orthogonal to ``ortho_to`` in the ``weight`` inner product.
    """
    if interval is None:
        if isinstance(f, FunctionTrace):
            interval = f.interval
        elif ortho_to is not None:
            interval = ortho_to.interval
        else:
            raise ValueError("interval required")
    lo, hi = float(interval[0]), float(interval[1])
    if nodes is not None:
        nodes = np.asarray(nodes, dtype=float)
    elif isinstance(f, FunctionTrace):
        nodes = f.nodes
    elif ortho_to is not None:
        nodes = ortho_to.nodes
    else:
        nodes = default_grid(lo, hi, _frequency(p, q, mu, lo, hi))
    n = nodes.size - 1
    phi1, phi2 = _fundamental(p, q, float(mu), lo, hi, tol, n)
    if f is None:
        part = FunctionTrace(phi1.nodes, np.zeros(n + 1), np.zeros(n + 1))
        pend = (0.0, 0.0)
    else:
        part = integrate_ivp_forced(p, q, mu, lo, hi, 0.0, 0.0, f, tol, phi1.nodes)
        pend = (float(part.u[-1]), float(part.du[-1] * p(hi)))
    (klo, vlo), (khi, vhi) = bc
    e1 = (float(phi1.u[-1]), float(phi1.du[-1] * p(hi)))
    e2 = (float(phi2.u[-1]), float(phi2.du[-1] * p(hi)))
    M = np.array([
        [_apply_bc(klo, 1.0, 0.0), _apply_bc(klo, 0.0, 1.0)],
        [_apply_bc(khi, *e1), _apply_bc(khi, *e2)],
    ])
    rhs = np.array([vlo, vhi - _apply_bc(khi, *pend)])
    if ortho_to is None:
        c = np.linalg.solve(M, rhs)
    else:
        U, s, Vt = np.linalg.svd(M)
        proj = U.T @ rhs
        scale = max(1.0, abs(vlo), abs(vhi), float(np.max(np.abs(part.u))), abs(pend[1]))
        if info is not None:
            info["solvability"] = abs(proj[1]) / scale
        if abs(proj[1]) > solv_tol * scale:
            raise SolvabilityError(abs(proj[1]), scale)
        c = Vt[0] * (proj[0] / s[0])
    sol = FunctionTrace(part.nodes, part.u + c[0] * phi1.u + c[1] * phi2.u,
                        part.du + c[0] * phi1.du + c[1] * phi2.du)
    if ortho_to is not None:
        coef = inner(sol, ortho_to, weight) / inner(ortho_to, ortho_to, weight)
        sol = trace_combine(1.0, sol, -coef, ortho_to)
    return sol


def ode_residual(t: FunctionTrace, p, mu: float, q, f=None) -> float:
    """Sup over cells of |(F_{i+1} - F_i + mu int q u - int f) / h|, a weak residual of the ODE."""
    nodes = t.nodes
    F = p(nodes) * t.du
    x, w = gauss_points(nodes)
    g = mu * q(x) * t(x)
    if f is not None:
        g = g - f(x)
    cell = (w * g).reshape(-1, 5).sum(axis=1)
    h = np.diff(nodes)
    return float(np.max(np.abs((F[1:] - F[:-1] + cell) / h)))
