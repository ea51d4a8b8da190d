"""
SVG figures for flow runs: generating-curve snapshots and the α(τ) series.

Only imported when a command asks for `--svg`; the Agg backend keeps it
usable without a display.
"""

from __future__ import annotations

import logging
import os
from typing import Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from oval_lab_app.errors import UsageError  # noqa: E402

logger = logging.getLogger(__name__)

PROFILES_SVG = "profiles.svg"
ALPHA_SVG = "alpha.svg"


def plot_profiles(
    out_dir: str,
    times: Sequence[float],
    curves: Sequence[Tuple[np.ndarray, np.ndarray]],
    max_curves: int = 8,
    filename: str = PROFILES_SVG,
) -> str:
    """Draws up to `max_curves` evenly chosen snapshots, mirrored to r < 0."""
    if not curves:
        raise UsageError("no curves to plot")
    os.makedirs(out_dir, exist_ok=True)
    picks = np.unique(np.linspace(0, len(curves) - 1, min(max_curves, len(curves))).astype(int))
    fig, ax = plt.subplots(figsize=(8, 4))
    for k in picks:
        y, r = curves[k]
        (line,) = ax.plot(y, r, lw=1.0, label=f"τ = {times[k]:.3g}")
        ax.plot(y, -np.asarray(r), lw=1.0, color=line.get_color())
    ax.set_aspect("equal")
    ax.set_xlabel("y")
    ax.set_ylabel("r")
    ax.legend(fontsize="small", loc="upper right")
    fig.tight_layout()
    path = os.path.join(out_dir, filename)
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.debug("wrote %s", path)
    return path


def plot_alpha(
    out_dir: str, tau: Sequence[float], alpha: Sequence[float], filename: str = ALPHA_SVG
) -> str:
    """|α(τ)| against the law 1/(4|τ|), on log-log axes."""
    t = np.asarray(tau, dtype=np.float64)
    a = np.abs(np.asarray(alpha, dtype=np.float64))
    if t.size == 0 or t.shape != a.shape:
        raise UsageError("need matching, non-empty τ and α series")
    if np.any(t >= 0):
        raise UsageError("α is plotted against rescaled times τ < 0")
    os.makedirs(out_dir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(-t, a, "o-", ms=3, label="|α|")
    ax.loglog(-t, 1.0 / (4.0 * -t), "--", label="1/(4|τ|)")
    ax.set_xlabel("|τ|")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, filename)
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.debug("wrote %s", path)
    return path
