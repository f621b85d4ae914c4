"""Matplotlib rendering of sweep products to image files.

Every function takes in-memory data (or a sweep CSV) and writes a PNG next to
the delimited output, so a report directory is self-contained.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_trajectories",
    "plot_spectrum",
    "plot_observable_curves",
    "plot_collapse",
    "plot_power_law",
    "plot_bound_check",
]


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def plot_trajectories(curves, path, title=None):
    """curves: list of (label, times, values) for <Sz>(t)/N."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for label, t, y in curves:
        ax.plot(t, y, label=label)
    ax.set_xlabel(r"$\kappa t$")
    ax.set_ylabel(r"$\langle S_z\rangle(t)/N$")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_spectrum(eigenvalues, path, title=None):
    """Scatter of slow Liouvillian eigenvalues in the complex plane."""
    w = np.asarray(eigenvalues)
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    ax.scatter(w.real, w.imag, s=24, color="tab:blue", zorder=3)
    ax.axvline(0.0, color="gray", lw=0.6)
    ax.axhline(0.0, color="gray", lw=0.6)
    ax.set_xlabel(r"$\mathrm{Re}\,E_j/\kappa$")
    ax.set_ylabel(r"$\mathrm{Im}\,E_j/\kappa$")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_observable_curves(per_size, path, ylabel, title=None, logy=False):
    """per_size: list of (N, x, y) curves versus omega/kappa."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for n, x, y in per_size:
        ax.plot(x, y, marker=".", ms=3, label=f"N={int(n)}")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(r"$\omega/\kappa$")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_collapse(scaled, path, ylabel, title=None):
    """scaled: output of scale_dataset, one (N, u, v, dv) tuple per size."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for n, u, v, _ in scaled:
        ax.plot(u, v, marker=".", ms=3, lw=0.8, label=f"N={int(n)}")
    ax.set_xlabel(r"$N^{1/\nu}(\omega-\omega_c)/\kappa$")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_power_law(ns, ys, fit, path, ylabel, title=None, loglog=True):
    """Data points with the fitted scaling model overlaid."""
    from btclab.scaling import _decay_offset_model, _pareto_model, _power_model

    ns = np.asarray(ns, dtype=float)
    ys = np.asarray(ys, dtype=float)
    grid = np.geomspace(ns.min(), ns.max(), 200)
    if fit.model == "power":
        curve = _power_model(grid, fit.params["a"], fit.params["b"])
    elif fit.model == "pareto":
        curve = _pareto_model(grid, fit.params["amplitude"], fit.params["c"])
    else:
        curve = _decay_offset_model(
            grid, fit.params["a"], fit.params["b"], fit.params["c"]
        )
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.plot(ns, ys, "o", ms=5, label="data")
    label = ", ".join(f"{k}={v:.3g}" for k, v in fit.params.items())
    ax.plot(grid, curve, "-", label=f"{fit.model}: {label}")
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_bound_check(ns, rates, steady_rates, kappa, path, title=None):
    """F_Q/T for trajectory and steady-state protocols against N/(2 kappa)."""
    ns = np.asarray(ns, dtype=float)
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.plot(ns, rates, "^", ms=6, color="m", label=r"trajectory $F_Q/T$")
    ax.plot(ns, steady_rates, "s", ms=5, color="tab:blue",
            label=r"steady state $F_Q/T$")
    grid = np.linspace(ns.min(), ns.max(), 50)
    ax.plot(grid, grid / (2.0 * kappa), "g-", label=r"bound $N/(2\kappa)$")
    ax.set_xlabel("N")
    ax.set_ylabel(r"$F_Q/T$")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)
