"""Static SVG figures for sweeps, spectrograms and trajectories."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .emission import Spectrogram  # noqa: E402
from .propagator import Trajectory  # noqa: E402
from .sweeps import SweepResult  # noqa: E402
from .units import GHZ, PS  # noqa: E402

AXIS_LABELS = {
    "theta_in_pi": r"$\Theta/\pi$",
    "alpha_over_tau0_sq": r"$\alpha/\tau_0^2$",
    "delta_over_Gamma0": r"$\delta/\Gamma_0$",
    "theta": r"$\Theta$ (rad)",
    "alpha": r"$\alpha$ (s$^2$)",
    "delta": r"$\delta$ (rad/s)",
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return path


def plot_sweep(result: SweepResult, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    if len(result.axes) == 1:
        a = result.axes[0]
        ax.plot(result.grids[0], result.rho_ee, "-", color="k")
        ax.set_xlabel(AXIS_LABELS[a.label])
        ax.set_ylabel(r"$\rho_{ee}$")
        ax.set_ylim(-0.02, 1.02)
    else:
        a1, a2 = result.axes
        # first axis on y, second on x
        mesh = ax.pcolormesh(
            result.grids[1], result.grids[0], result.rho_ee, vmin=0, vmax=1,
            cmap="viridis", shading="nearest", rasterized=True,
        )
        fig.colorbar(mesh, ax=ax, label=r"$\rho_{ee}$")
        ax.set_xlabel(AXIS_LABELS[a2.label])
        ax.set_ylabel(AXIS_LABELS[a1.label])
    return _save(fig, path)


def plot_spectrogram(spec: Spectrogram, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    mesh = ax.pcolormesh(
        spec.t_grid / PS, spec.omega_grid / GHZ, spec.values.T, vmin=0, vmax=1,
        cmap="magma", shading="nearest", rasterized=True,
    )
    fig.colorbar(mesh, ax=ax, label="S (arb. u.)")
    ax.set_xlabel("t (ps)")
    ax.set_ylabel(r"$(\omega - \omega_0)/2\pi$ (GHz)")
    return _save(fig, path)


def plot_trajectory(traj: Trajectory, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(traj.t_grid / PS, traj.rho_ee, color="k", label=r"$\rho_{ee}$")
    ax.plot(traj.t_grid / PS, np.abs(traj.rho_eg), color="0.6", lw=0.8, label=r"$|\rho_{eg}|$")
    ax.set_xlabel("t (ps)")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False)
    return _save(fig, path)
