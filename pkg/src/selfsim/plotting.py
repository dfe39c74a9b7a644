"""SVG figures for the command-line reports.

Figures are written with a fixed hash salt and without a date stamp, so
identical data produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "selfsim", "svg.fonttype": "none"}


def _save(fig, path):
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_profile(profile, path, L=None):
    """Profile and its rescaled tail ``phi + 2 log r``."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax0.plot(profile.r, profile.value, lw=1.2)
    ax0.set_xlabel("r")
    ax0.set_ylabel("phi")
    r = profile.r[profile.r > 0]
    ax1.plot(r, profile(r) + 2 * np.log(r), lw=1.2)
    if L is not None:
        ax1.axhline(L, color="k", ls=":", lw=0.8)
    ax1.set_xscale("log")
    ax1.set_xlabel("r")
    ax1.set_ylabel("phi + 2 log r")
    fig.tight_layout()
    return _save(fig, path)


def plot_branches(diagram, path, level=None):
    """L(alpha) with turning points marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(diagram.alphas, diagram.L_values, ".-", ms=2, lw=0.8)
    if diagram.critical_points:
        ax.plot(diagram.critical_points, diagram.critical_values, "o", mfc="none")
    if level is not None:
        ax.axhline(level, color="k", ls=":", lw=0.8)
    ax.set_xlabel("alpha")
    ax.set_ylabel("L")
    fig.tight_layout()
    return _save(fig, path)


def plot_convergence(report, path):
    """Log-log plot of sup_diff and |L_n - L| against n."""
    ns = np.array([e.n for e in report.entries], dtype=float)
    sup = np.array([e.sup_diff for e in report.entries])
    lerr = np.array([np.nan if e.L_n_err is None else e.L_n_err for e in report.entries])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ns, sup, "o-", label="sup_diff")
    ax.loglog(ns, lerr, "s--", label="L_n_err")
    ax.set_xlabel("n")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_sup_history(outcomes, path):
    """sup w against s for each labelled outcome."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, out in outcomes:
        h = np.array(out.sup_history)
        ax.plot(h[:, 0], h[:, 1], lw=1.0, label=label)
    ax.set_xscale("symlog", linthresh=1e-3)
    ax.set_xlabel("s")
    ax.set_ylabel("max w")
    if outcomes:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
