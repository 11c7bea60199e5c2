"""Figure rendering for reconstruction and propagation reports.

Everything draws on the Agg backend and is written straight to file, so runs
are reproducible byte for byte on a fixed matplotlib version.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .propagate import PropagationReport
from .reconstruct import ReconstructedState

__all__ = ["state_figure", "sweep_figure", "propagation_figure", "save_figure"]


def state_figure(state: ReconstructedState, title: str = None):
    """Three stacked panels: potential, Re/Im of psi, density."""
    xs = state.grid.points()
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 8.0), sharex=True)
    ax = axes[0]
    ax.plot(xs, state.V, color="tab:red")
    ax.set_ylabel("V")
    if title:
        ax.set_title(title)
    ax = axes[1]
    ax.plot(xs, state.psi.real, label="Re psi", color="tab:blue")
    ax.plot(xs, state.psi.imag, label="Im psi", color="tab:orange")
    ax.set_ylabel("psi")
    ax.legend(loc="upper right", fontsize="small")
    ax = axes[2]
    ax.plot(xs, state.rho, color="tab:green")
    ax.set_ylabel("rho")
    ax.set_xlabel("r" if state.geometry == "radial" else "x")
    fig.tight_layout()
    return fig


def sweep_figure(states, labels, title: str = None):
    """Overlay V, Re psi and rho for a family swept over the current constant."""
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 8.0), sharex=True)
    for state, label in zip(states, labels):
        xs = state.grid.points()
        axes[0].plot(xs, state.V, label=label)
        axes[1].plot(xs, state.psi.real, label=label)
        axes[2].plot(xs, state.rho, label=label)
    axes[0].set_ylabel("V")
    if title:
        axes[0].set_title(title)
    axes[1].set_ylabel("Re psi")
    axes[2].set_ylabel("rho")
    axes[2].set_xlabel("x")
    axes[0].legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    return fig


def propagation_figure(report: PropagationReport, title: str = None):
    """Norm drift, fidelity and phase error against time."""
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 8.0), sharex=True)
    t = report.times
    axes[0].plot(t, report.norm_t / report.norm_t[0] - 1.0, color="tab:blue")
    axes[0].set_ylabel("norm drift")
    if title:
        axes[0].set_title(title)
    axes[1].plot(t, report.fidelity_t, color="tab:green")
    axes[1].set_ylabel("fidelity")
    axes[2].plot(t, report.phase_err_t, color="tab:red")
    axes[2].set_ylabel("phase error")
    axes[2].set_xlabel("t")
    fig.tight_layout()
    return fig


def save_figure(fig, path):
    fig.savefig(path, dpi=140)
    plt.close(fig)
