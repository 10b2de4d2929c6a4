"""SVG figures: path overlay, deviation, inputs and the tolerance sweep."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed element ids and no timestamp keep the SVG output byte-stable
matplotlib.rcParams["svg.hashsalt"] = "contourref"
_META = {"Date": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(Path(path), format="svg", metadata=_META)
    plt.close(fig)


def plot_overlay(objective, omega_global, gamma_global, path, trajectory=None):
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(*objective.reference_polyline().T * 1e3, color="0.6", lw=1.0, label="contour")
    ax.plot(*gamma_global[:, 0, :2].T * 1e3, ".", ms=2, color="tab:orange", label="reference (knots)")
    ax.plot(*omega_global[:, 0, :2].T * 1e3, ".", ms=2, color="tab:blue", label="output (knots)")
    if trajectory is not None:
        ax.plot(*trajectory.pos.T * 1e3, lw=0.6, color="tab:green", label="simulated output")
    ax.set_aspect("equal")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    ax.legend(loc="best", fontsize=8)
    _save(fig, path)


def plot_deviation(solution, tol, relax_count, path):
    k = np.arange(solution.n)
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(k, solution.deviation * 1e6, lw=1.0, label="output deviation")
    ax.plot(k, solution.gamma_local[:, 0, 1] * 1e6, lw=0.8, alpha=0.7, label="reference deviation")
    for s in (-1, 1):
        ax.axhline(s * tol * 1e6, color="tab:red", lw=0.8, ls="--")
    ax.axvline(relax_count, color="0.5", lw=0.8, ls=":")
    ax.set_xlabel("contour index")
    ax.set_ylabel("deviation [um]")
    ax.legend(loc="best", fontsize=8)
    _save(fig, path)


def plot_inputs(solution, u_max, path):
    k = np.arange(solution.n)
    fig, axes = plt.subplots(2, 1, figsize=(7, 4.5), sharex=True)
    for j, ax in enumerate(axes):
        ax.plot(k, solution.u[:, j], lw=1.0, label=f"u_{'xy'[j]}")
        ax.plot(k, solution.v[:, j], lw=0.8, alpha=0.7, label=f"v_{'xy'[j]}")
        for s in (-1, 1):
            ax.axhline(s * u_max, color="tab:red", lw=0.8, ls="--")
        ax.set_ylabel("acceleration [m/s^2]")
        ax.legend(loc="best", fontsize=8)
    axes[-1].set_xlabel("contour index")
    _save(fig, path)


def plot_sweep(rows, path):
    tol = np.array([r.tol for r in rows]) * 1e6
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(tol, [r.traversal_time * 1e3 for r in rows], "o-", color="tab:blue")
    ax.set_xlabel("tolerance [um]")
    ax.set_ylabel("traversal time [ms]", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(tol, [r.l2 * 1e6 for r in rows], "s-", color="tab:green", label="L2 error")
    ax2.plot(tol, [r.l2_band * 1e6 for r in rows], "-", color="tab:red", label="band")
    ax2.set_ylabel("L2 error [um]", color="tab:green")
    ax2.legend(loc="upper left", fontsize=8)
    _save(fig, path)
