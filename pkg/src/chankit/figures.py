"""Matplotlib renderers for the report path.

Figures are written to files next to the delimited/JSON outputs; nothing here
opens an interactive window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .cir import Pdap
from .stats import fspl


def save_pdap_heatmap(pdap: Pdap, path, title: str | None = None, floor_db: float | None = None) -> None:
    """Azimuth-delay power heatmap; below-floor cells are blanked."""
    power = np.where(pdap.below_floor, np.nan, pdap.power_db)
    if floor_db is not None:
        power = np.where(power < floor_db, np.nan, power)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    mesh = ax.pcolormesh(
        pdap.delay_axis_s * 1e9,
        pdap.az_axis_deg,
        power,
        shading="nearest",
        cmap="viridis",
    )
    fig.colorbar(mesh, ax=ax, label="power [dB]")
    ax.set_xlabel("delay [ns]")
    ax.set_ylabel("azimuth AoA [deg]")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


_CASE_STYLE = {"los": ("tab:blue", "o"), "nlos": ("tab:red", "s"), "olos": ("tab:green", "^")}


def save_path_loss_figure(samples, fits_by_case: dict, d0_m: float, f_hz: float, path) -> None:
    """Scatter of measured path losses with fitted model lines per case.

    ``fits_by_case`` follows the report structure: case -> {ci_fit_best, ...}.
    """
    samples = list(samples)
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), sharey=True)
    distances = [s.distance_m for s in samples]
    d_line = np.geomspace(min(distances), max(distances), 200) if samples else np.geomspace(1, 30, 200)

    for ax, which in zip(axes, ("best", "omni")):
        for case, (color, marker) in _CASE_STYLE.items():
            case_samples = [s for s in samples if s.case.value == case]
            if not case_samples:
                continue
            d = [s.distance_m for s in case_samples]
            pl = [s.pl_best_db if which == "best" else s.pl_omni_db for s in case_samples]
            ax.scatter(d, pl, c=color, marker=marker, s=30, label=f"{case} measured")
            fits = fits_by_case.get(case, {})
            ci = fits.get(f"ci_fit_{which}")
            if ci:
                ax.plot(
                    d_line,
                    10.0 * ci["ple"] * np.log10(d_line / d0_m) + fspl(d0_m, f_hz),
                    color=color,
                    linestyle="-",
                    label=f"{case} CI (PLE={ci['ple']:.2f})",
                )
            ab = fits.get(f"alpha_beta_{which}")
            if ab:
                ax.plot(
                    d_line,
                    10.0 * ab["alpha"] * np.log10(d_line) + ab["beta_db"],
                    color=color,
                    linestyle="--",
                    label=f"{case} AB (a={ab['alpha']:.2f}, b={ab['beta_db']:.1f})",
                )
        ax.plot(d_line, [fspl(d, f_hz) for d in d_line], "k:", linewidth=1, label="free space")
        ax.set_xscale("log")
        ax.set_xlabel("Tx-Rx distance [m]")
        ax.set_title(f"{which} direction")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=7)
    axes[0].set_ylabel("path loss [dB]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_interval_histogram(intervals_by_case: dict, path) -> None:
    """Histogram of inter-cluster arrival intervals with exponential overlays.

    ``intervals_by_case`` maps case name to an array of intervals in ns.
    """
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for case, (color, _) in _CASE_STYLE.items():
        intervals = np.asarray(intervals_by_case.get(case, ()), dtype=float)
        if intervals.size == 0:
            continue
        mean = intervals.mean()
        ax.hist(
            intervals, bins=min(30, max(5, intervals.size // 4)), density=True,
            alpha=0.35, color=color, label=f"{case} (mean {mean:.2f} ns, n={intervals.size})",
        )
        if mean > 0 and intervals.size >= 2:
            x = np.linspace(0.0, intervals.max(), 200)
            ax.plot(x, np.exp(-x / mean) / mean, color=color, linewidth=1.5)
    ax.set_xlabel("inter-cluster interval [ns]")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
