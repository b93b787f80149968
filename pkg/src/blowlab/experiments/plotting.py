"""SVG figures through matplotlib's Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["loglog_fit_svg", "series_svg"]

# fixed ids and no timestamp so reruns write identical files
_RC = {"svg.hashsalt": "blowlab", "svg.fonttype": "none", "figure.figsize": (5.0, 3.6), "font.size": 9}
_META = {"Date": None, "Creator": None}


def loglog_fit_svg(
    path: Path,
    x: Sequence[float],
    y: Sequence[float],
    slope: float,
    intercept: float,
    theta: float | None,
    xlabel: str,
    ylabel: str,
    title: str = "",
) -> Path:
    """Scatter of (log x, log y) with the fitted line and a reference line of slope theta.

    The reference line passes through the data centroid.
    """
    lx, ly = np.asarray(x, float), np.asarray(y, float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(lx, ly, "o", color="k", ms=4, label="measured")
        grid = np.linspace(lx.min(), lx.max(), 50)
        ax.plot(grid, intercept + slope * grid, "-", color="tab:blue", lw=1, label=f"fit, slope {slope:.4g}")
        if theta is not None:
            c = ly.mean() - theta * lx.mean()
            ax.plot(grid, c + theta * grid, "--", color="tab:red", lw=1, label=f"theory, slope {theta:.4g}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata=_META)
        plt.close(fig)
    return Path(path)


def series_svg(path: Path, x: Sequence[float], ys: dict[str, Sequence[float]], xlabel: str, ylabel: str, logy=False) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for label, y in ys.items():
            ax.plot(x, y, "-o", ms=3, lw=1, label=label)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False)
        fig.tight_layout()
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata=_META)
        plt.close(fig)
    return Path(path)
