"""Figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "legend.fontsize": 9,
    "svg.hashsalt": "wardropdyn",
}


def _positive(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 0, y, np.nan)


def save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no timestamps, so figures are reproducible
    meta = {"Date": None} if path.suffix in (".svg", ".pdf") else {"Software": None}
    fig.savefig(path, metadata=meta, bbox_inches="tight")
    plt.close(fig)


def distance_figure(series: dict, title: str = "", ylabel=r"$\|\rho(t)-\rho^h\|_1$"):
    """Log-linear plot of one or more ``label -> (t, distance)`` series."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, (t, d) in series.items():
            ax.semilogy(t, _positive(d), label=label, lw=1.4)
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend()
    return fig


def run_figure(traj, title: str = ""):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 6.0))
        ax1.semilogy(traj.times, _positive(traj.dist_l1), color="C0")
        ax1.set_ylabel(r"$\|\rho(t)-\rho^h\|_1$")
        if title:
            ax1.set_title(title)
        ax2.semilogy(traj.times, _positive(traj.V), label="V", color="C1")
        ax2.semilogy(traj.times, _positive(traj.W), label="W", color="C2")
        ax2.set_xlabel("t")
        ax2.set_ylabel("Lyapunov value")
        ax2.legend()
    return fig


def write_figures(fig_factory, base: Path, formats) -> list[Path]:
    """Render once per requested format (``svg``/``png``) to ``base.<fmt>``."""
    written = []
    for ext in formats:
        path = Path(base).with_suffix("." + ext)
        save(fig_factory(), path)
        written.append(path)
    return written
