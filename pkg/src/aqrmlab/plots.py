"""Figure rendering for CLI reports.

Every run writes its data as CSV/JSON first; these helpers draw the matching
figure next to the data files.  Agg backend only, no interactive windows.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)


def fs_curve_figure(curves, path):
    """chi_F vs g/g_c, one line per frequency ratio."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for c in curves:
        gc = c.params.critical_coupling
        ax.plot(c.g_grid / gc, c.chi, lw=1.2,
                label=rf"$\eta={c.eta:g}$, $\lambda={c.anisotropy:g}$")
    ax.set_xlabel(r"$g/g_c$")
    ax.set_ylabel(r"$\chi_F$")
    ax.legend(fontsize=8)
    return _save(fig, path)


def scaling_figure(sweeps, path):
    """Log-log peak height and peak distance vs eta with fitted lines.

    sweeps: dict anisotropy -> (records, fits dict)
    """
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.2, 3.6))
    for lam, (records, fits) in sweeps.items():
        etas = np.array([r.eta for r in records])
        chi = np.array([r.chi_max for r in records])
        dist = np.array([abs(1 - r.g_max_over_gc) for r in records])
        da = fits["adiabatic_dimension"]
        ps = fits["peak_shift"]
        ax1.loglog(etas, chi, "o", ms=4, label=rf"$\lambda={lam:g}$: {da.exponent:.3f}")
        ax1.loglog(etas, np.exp(da.intercept) * etas ** da.exponent, "--", lw=0.8)
        ax2.loglog(etas, dist, "s", ms=4, label=rf"$\lambda={lam:g}$: {ps.exponent:.3f}")
        ax2.loglog(etas, np.exp(ps.intercept) * etas ** ps.exponent, "--", lw=0.8)
    ax1.set_xlabel(r"$\eta$"); ax1.set_ylabel(r"$\chi_F^{max}$")
    ax2.set_xlabel(r"$\eta$"); ax2.set_ylabel(r"$|1-g_{max}/g_c|$")
    ax1.legend(fontsize=7); ax2.legend(fontsize=7)
    return _save(fig, path)


def cumulant_figure(curves, crossings, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for c in curves:
        ax.plot(c.u_grid, c.values, lw=1.2,
                label=rf"$\eta={c.eta:g}$, $\lambda={c.anisotropy:g}$")
    for x in crossings:
        ax.axvline(x["u_star"], color="0.8", lw=0.6, zorder=0)
    ax.axvline(1.0, color="k", lw=0.8, ls=":")
    ax.set_xlabel(r"$g/g_c$")
    ax.set_ylabel(r"$U_X$")
    ax.legend(fontsize=8)
    return _save(fig, path)


def collapse_figure(result, contrast, path):
    ncols = 2 if contrast is not None else 1
    fig, axes = plt.subplots(1, ncols, figsize=(4.8 * ncols, 3.6), squeeze=False)
    for ax, res, title in zip(
            axes[0], [result, contrast],
            [rf"$\nu={result.nu:g}$ (residual {result.residual:.3f})",
             None if contrast is None else
             rf"$\nu={contrast.nu:g}$ (residual {contrast.residual:.3f})"]):
        if res is None:
            continue
        for c in res.rescaled:
            ax.plot(c.u, c.y, lw=1.0, label=c.label)
        ax.set_xlabel(r"$\eta'^{1/\nu}\,(g-g_c)/g_c$")
        ax.set_ylabel(r"$U_X$")
        ax.set_title(title, fontsize=9)
        ax.legend(fontsize=7)
    return _save(fig, path)


def dynamics_figure(times, full, eff, path, time_unit="ns"):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)
    ax1.plot(times, full["P_g"], "r-", lw=1.0, label="full")
    ax1.plot(times, eff["P_g"], "bo", ms=2.2, mfc="none", label="effective")
    ax1.set_ylabel(r"$P_g(t)$")
    ax1.legend(fontsize=8)
    ax2.plot(times, full["S_G"], "r-", lw=1.0)
    ax2.plot(times, eff["S_G"], "bo", ms=2.2, mfc="none")
    ax2.set_ylabel(r"$S_G(t)$ (bits)")
    ax2.set_xlabel(f"t ({time_unit})")
    return _save(fig, path)


def wigner_figure(grids, labels, path):
    n = len(grids)
    fig, axes = plt.subplots(1, n, figsize=(3.0 * n, 2.9), squeeze=False)
    vmax = max(np.abs(g.values).max() for g in grids)
    for ax, g, lab in zip(axes[0], grids, labels):
        im = ax.pcolormesh(g.x, g.p, g.values, cmap="RdBu_r",
                           vmin=-vmax, vmax=vmax, shading="auto")
        ax.set_title(lab, fontsize=8)
        ax.set_xlabel("X")
        ax.set_ylabel("P")
        ax.set_aspect("equal")
    fig.colorbar(im, ax=axes[0].tolist(), shrink=0.85)
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)


def gate_figure(matrix, target, path):
    fig, axes = plt.subplots(1, 2, figsize=(7.0, 3.0))
    for ax, m, title in zip(axes, [matrix, target], ["extracted |U|", "target |U|"]):
        im = ax.imshow(np.abs(m), cmap="viridis", vmin=0, vmax=1)
        ax.set_xticks(range(4)); ax.set_yticks(range(4))
        labels = ["ee", "eg", "ge", "gg"]
        ax.set_xticklabels(labels); ax.set_yticklabels(labels)
        ax.set_title(title, fontsize=9)
    fig.colorbar(im, ax=axes.tolist(), shrink=0.8)
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)
