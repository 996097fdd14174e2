"""Optional matplotlib figures written next to the CSV outputs.

The numbers of record are always the CSV files; figures are a convenience
produced only on request and rendered with the non-interactive Agg backend.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .harness import ERROR_NAMES

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

_LABELS = {"e_u": r"$e_u$", "e_eta": r"$e_\eta$", "e_xi": r"$e_\xi$", "e_E": r"$e_E$"}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps repeated renders byte-stable
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata={"Software": None})
    return path


def plot_convergence(reports, path) -> Path:
    """Log-log error curves, one panel per norm, one line per coupling parameter."""
    plt = _pyplot()
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(ERROR_NAMES), figsize=(3.0 * len(ERROR_NAMES), 2.8),
                                 sharex=True)
        for ax, name in zip(axes, ERROR_NAMES):
            for rep in reports:
                ax.loglog(rep.dts, rep.errors[name], "o-",
                          label=f"L={rep.L:g} (slope {rep.slopes[name]:.2f})")
            dts = np.asarray(reports[0].dts)
            ref = np.asarray(reports[0].errors[name])
            ax.loglog(dts, ref[0] * dts / dts[0], "k--", lw=0.8, label=r"$O(\Delta t)$")
            ax.loglog(dts, ref[0] * np.sqrt(dts / dts[0]), "k:", lw=0.8, label=r"$O(\Delta t^{1/2})$")
            ax.set_xlabel(r"$\Delta t$")
            ax.set_title(_LABELS[name])
            ax.legend(loc="best")
        out = _save(fig, path)
        plt.close(fig)
    return out


def plot_energy(rows, path) -> Path:
    """Energy ledger against time, with the stability bound as a reference line."""
    plt = _pyplot()
    t = np.array([r.t for r in rows])
    with plt.rc_context(_STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(7.0, 2.8))
        ax0.plot(t, [r.E for r in rows], label="E")
        ax0.plot(t, [r.I for r in rows], label="I")
        ax0.plot(t, [r.running_sum for r in rows], label="E + sum D + I")
        ax0.plot(t, [r.bound_E0_plus_I0 for r in rows], "k--", lw=0.8, label="E0 + I0")
        ax0.set_xlabel("t")
        ax0.legend(loc="best")
        ax1.semilogy(t, np.maximum([r.u_minus_xi_gamma_norm for r in rows], 1e-300), label="|u - xi|")
        ax1.semilogy(t, np.maximum([r.F_gamma_norm for r in rows], 1e-300), label="|F|")
        ax1.semilogy(t, np.maximum([r.S_gamma_norm for r in rows], 1e-300), label="|S|")
        ax1.set_xlabel("t")
        ax1.set_title("interface norms")
        ax1.legend(loc="best")
        out = _save(fig, path)
        plt.close(fig)
    return out


def plot_mesh(tri, displacement, tau_m, path) -> Path:
    """Displaced mesh coloured by the stiffening coefficient."""
    plt = _pyplot()
    moved = tri.vertices + np.asarray(displacement)[: tri.n_vertices]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.6))
        pc = ax.tripcolor(moved[:, 0], moved[:, 1], tri.triangles, facecolors=tau_m,
                          edgecolors="k", linewidth=0.2, cmap="viridis")
        fig.colorbar(pc, ax=ax, label=r"$\tau_m$")
        ax.set_aspect("equal")
        ax.grid(False)
        out = _save(fig, path)
        plt.close(fig)
    return out
