"""Matplotlib figure rendering for the CLI report paths.

Figures are written as SVG next to the delimited outputs; every plotted
series carries a group id so the files stay machine-checkable.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams["figure.figsize"] = (6.0, 4.0)
plt.rcParams["figure.dpi"] = 120
plt.rcParams["savefig.bbox"] = "tight"
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def _save(fig, path) -> str:
    fig.savefig(path, format="svg")
    plt.close(fig)
    return str(path)


def rate_plot(path, ns, medians, slope, intercept, reference_slope) -> str:
    """Log-log risk-versus-n plot with the fitted and reference slopes."""
    fig, ax = plt.subplots()
    logn = np.log(ns)
    (line,) = ax.plot(ns, medians, "o-", label="median risk")
    line.set_gid("series-median-risk")
    fit = np.exp(intercept + slope * logn)
    (line,) = ax.plot(ns, fit, "--", label=f"fit slope {slope:.3f}")
    line.set_gid("series-fitted")
    ref = np.exp(np.log(medians[0]) + reference_slope * (logn - logn[0]))
    (line,) = ax.plot(ns, ref, ":", label=f"reference slope {reference_slope:.3f}")
    line.set_gid("series-reference")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("W1 risk")
    ax.legend()
    return _save(fig, path)


def ladder_plot(path, xs, series, xlabel, ylabel, loglog=True) -> str:
    """Generic ladder plot; ``series`` maps label -> values."""
    fig, ax = plt.subplots()
    for label, vals in series.items():
        (line,) = ax.plot(xs, vals, "o-", label=label)
        line.set_gid(f"series-{label.replace(' ', '-')}")
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    return _save(fig, path)


def density_plot(path, grids, labels) -> str:
    """Overlayed grid functions (densities or CDFs)."""
    fig, ax = plt.subplots()
    for g, label in zip(grids, labels):
        (line,) = ax.plot(g.x, np.real(g.values), label=label)
        line.set_gid(f"series-{label.replace(' ', '-')}")
    ax.set_xlabel("x")
    ax.set_ylabel("value")
    ax.legend()
    return _save(fig, path)


def trace_plot(path, traces) -> str:
    """Stacked MCMC trace panels; ``traces`` maps name -> array."""
    fig, axes = plt.subplots(len(traces), 1, sharex=True,
                             figsize=(6.0, 2.0 * len(traces)))
    if len(traces) == 1:
        axes = [axes]
    for ax, (name, vals) in zip(axes, traces.items()):
        (line,) = ax.plot(vals, lw=0.7)
        line.set_gid(f"series-{name}")
        ax.set_ylabel(name)
    axes[-1].set_xlabel("iteration")
    return _save(fig, path)
