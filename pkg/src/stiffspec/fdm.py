"""Finite-difference generalized eigensolve, used as an independent oracle.

The transmission problem is one Sturm-Liouville problem (K u')' + mu W u = 0 with
K = (k, eps kappa) and W = (r, eps rho). Conservative central differences with
midpoint stiffness and lumped mass give a symmetric tridiagonal pencil; x = 0 is a node.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .coeffs import ProblemSpec


def fd_eigenvalues(p: ProblemSpec, eps: float, count: int, n: int = 4000) -> np.ndarray:
    """Lowest `count` values of mu on a grid with n intervals."""
    nl = max(2, int(round(n * -p.a / (p.b - p.a))))
    nr = max(2, n - nl)
    xl = np.linspace(p.a, 0.0, nl + 1)
    xr = np.linspace(0.0, p.b, nr + 1)
    hl, hr = -p.a / nl, p.b / nr
    kmid = np.concatenate([p.k(0.5 * (xl[1:] + xl[:-1])), eps * p.kappa(0.5 * (xr[1:] + xr[:-1]))])
    h = np.concatenate([np.full(nl, hl), np.full(nr, hr)])
    c = kmid / h  # edge conductances
    # interior nodes: xl[1:], xr[1:-1] (x=0 appears once)
    wl = p.r(xl[1:-1]) * hl
    w0 = 0.5 * (p.r(0.0) * hl + eps * p.rho(0.0) * hr)
    wr = eps * p.rho(xr[1:-1]) * hr
    mass = np.concatenate([wl, [w0], wr])
    diag = c[:-1] + c[1:]
    off = -c[1:-1]
    s = 1.0 / np.sqrt(mass)
    d = diag * s * s
    e = off * s[:-1] * s[1:]
    return eigvalsh_tridiagonal(d, e, select="i", select_range=(0, count - 1))


def fd_richardson(p: ProblemSpec, eps: float, count: int, n: int = 8000) -> np.ndarray:
    """Second-order values on n and 2n intervals, extrapolated."""
    coarse = fd_eigenvalues(p, eps, count, n)
    fine = fd_eigenvalues(p, eps, count, 2 * n)
    return (4.0 * fine - coarse) / 3.0
