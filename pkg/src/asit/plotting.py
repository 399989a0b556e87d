"""Matplotlib renderings of design curves, convergence logs and slice panels.

Figures are a convenience layer; the CSV and PGM outputs are the reference
data.  PNGs are written without a Software tag so reruns are byte-stable.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_design_curve", "plot_convergence", "plot_slices", "plot_illumination"]

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 100,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_design_curve(rows, path, marks=(0.24, 0.6), wavelength=None, na=None) -> Path:
    """z_d against bwr, with optional marked operating points."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        b = np.array([r[0] for r in rows])
        z = np.array([r[1] for r in rows]) * 1e6
        ax.semilogy(b, z, "k-", lw=1.2)
        if wavelength is not None and na is not None:
            for m in marks:
                zm = wavelength / (na * m) ** 2 * 1e6
                ax.plot([m], [zm], "o", ms=4)
                ax.annotate(f"{zm:.1f} µm", (m, zm), textcoords="offset points", xytext=(5, 5))
        ax.set_xlabel("BWR")
        ax.set_ylabel(r"$z_d$ (µm)")
        ax.grid(True, which="both", lw=0.3, alpha=0.5)
        fig.tight_layout()
        return _save(fig, path)


def plot_convergence(log_rows, path) -> Path:
    rows = np.array([r[:7] for r in log_rows], dtype=float)
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9, 2.8))
        axes[0].semilogy(rows[:, 0], rows[:, 1])
        axes[0].set_title("C1 (data misfit)")
        axes[1].plot(rows[:, 0], rows[:, 2])
        axes[1].set_title("C2 (TV)")
        axes[2].plot(rows[:, 0], rows[:, 3], label="d1")
        axes[2].plot(rows[:, 0], rows[:, 4], label="d2")
        axes[2].set_title("step distances")
        axes[2].legend()
        for ax in axes:
            ax.set_xlabel("iteration")
        fig.tight_layout()
        return _save(fig, path)


def plot_slices(truth, estimate, path, vmin=None, vmax=None) -> Path:
    """Ground truth (top row) against reconstruction (bottom row), per slice."""
    n = truth.n_slices
    vmin = truth.slices.min() if vmin is None else vmin
    vmax = truth.slices.max() if vmax is None else vmax
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(2, n, figsize=(2.2 * n + 0.6, 4.4), squeeze=False)
        for j in range(n):
            for row, vol, label in ((0, truth, "truth"), (1, estimate, "recon")):
                ax = axes[row, j]
                im = ax.imshow(vol.slices[j], cmap="gray", vmin=vmin, vmax=vmax)
                ax.set_title(f"{label} slice {j + 1}")
                ax.set_xticks([])
                ax.set_yticks([])
        fig.colorbar(im, ax=axes.ravel().tolist(), shrink=0.8)
        return _save(fig, path)


def plot_illumination(field, measured, path) -> Path:
    """Illumination phase, measured phase and log spectrum magnitude."""
    spec = np.log10(1 + np.abs(np.fft.fftshift(np.fft.fft2(measured.values))))
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9, 3))
        axes[0].imshow(np.angle(field.values), cmap="twilight")
        axes[0].set_title("illumination phase")
        axes[1].imshow(np.angle(measured.values), cmap="twilight")
        axes[1].set_title("detected phase")
        axes[2].imshow(spec, cmap="magma")
        axes[2].set_title("detected |spectrum| (log)")
        for ax in axes:
            ax.set_xticks([])
            ax.set_yticks([])
        fig.tight_layout()
        return _save(fig, path)
