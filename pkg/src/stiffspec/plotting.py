"""Figures for convergence reports and eigenvalue branches (rendered to files, Agg backend)."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def fitted_line(eps, errors, slope):
    """Least-squares line in log-log coordinates with the given slope, for overlay."""
    x = np.log(np.asarray(eps, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    c = float(np.mean(y - slope * x))
    return [float(math.exp(c + slope * xi)) for xi in x]


def plot_reports(reports, path: Path, title: str = "") -> Path:
    """Overlay several ConvergenceReports on one log-log panel."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for rep in reports:
            eps, err = rep.eps_grid, rep.errors
            if min(err) <= 0:
                continue
            (line,) = ax.loglog(eps, err, "o", ms=3.5, label=rep.quantity)
            if rep.fitted_slope is not None:
                ax.loglog(eps, fitted_line(eps, err, rep.fitted_slope), "-", lw=0.9, color=line.get_color(),
                          label=f"slope {rep.fitted_slope:.3f}")
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_ylabel("error")
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_branches(eps, mus, limit_mus, path: Path, title: str = "") -> Path:
    """mu_j(eps) = lambda_j / eps against eps, with the limit values as dashed lines."""
    mus = np.asarray(mus, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for j in range(mus.shape[1]):
            ax.semilogx(eps, mus[:, j], "-o", ms=2.5, lw=0.9, label=f"j={j + 1}")
        for m in sorted(set(round(v, 12) for v in limit_mus)):
            ax.axhline(m, ls="--", lw=0.6, color="0.5")
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_ylabel(r"$\lambda_j/\varepsilon$")
        if title:
            ax.set_title(title)
        ax.legend(loc="best", ncol=2)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)
