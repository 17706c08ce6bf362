"""Small figures saved next to the CSV artifacts.

Every function takes an already-computed object and a path; nothing here
recomputes. The CLI calls these unless asked not to, so keep them cheap and
dependency-light (Agg only, one axes per file unless a twin is essential).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_mode_scatter(lset, path) -> None:
    """Generation-coloured scatter of the set in frequency space."""
    fig, ax = plt.subplots(figsize=(5.5, 5))
    for g, gen in enumerate(lset.generations):
        xs = [m[0] for m in gen]
        ys = [m[1] for m in gen]
        ax.scatter(xs, ys, s=28, label=f"generation {g + 1}")
    ax.axhline(0, lw=0.5, color="0.8")
    ax.axvline(0, lw=0.5, color="0.8")
    ax.set_xlabel("j")
    ax.set_ylabel("k")
    ax.set_title(f"mode set, {lset.N} generations, scale {lset.p}/{lset.q}")
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_toy_masses(traj, path) -> None:
    """Per-generation squared moduli along a chain orbit."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    sq = np.abs(traj.values) ** 2
    for i in range(sq.shape[1]):
        ax.plot(traj.times, sq[:, i], label=f"|b{i + 1}|^2")
    ax.set_xlabel("t")
    ax.set_ylabel("squared modulus")
    ax.set_title("chain generation masses")
    ax.legend(fontsize=8, ncol=2)
    _finish(fig, path)


def save_norm_history(times, columns: dict, path, title: str) -> None:
    """Generic time series plot; columns maps label -> array."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for label, ys in columns.items():
        ax.plot(times, ys, label=label)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title(title)
    _finish(fig, path)


def save_shadow_ladder(report, path) -> None:
    """Log-log gap against the scaling value, with the fitted slope."""
    lams = np.array([e.lam for e in report.entries])
    sups = np.array([e.sup_l1 for e in report.entries])
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.loglog(lams, sups, "o-", label="sup gap")
    if report.slope is not None and np.all(sups > 0):
        fit = report.prefactor * lams ** report.slope
        ax.loglog(lams, fit, "--", color="0.5",
                  label=f"slope {report.slope:.3f}")
    leaks = np.array([e.leak for e in report.entries])
    if np.all(leaks > 0):
        ax.loglog(lams, leaks, "s-", label="support leak")
    ax.set_xlabel("scaling value")
    ax.set_ylabel("sup l1 distance")
    ax.set_title("shadowing ladder")
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_z_series(report, path) -> None:
    """Defect magnitude history per rung, one panel per ladder value."""
    entries = [e for e in report.entries if e.z_times is not None]
    if not entries:
        return
    fig, axes = plt.subplots(
        1, len(entries), figsize=(4.0 * len(entries), 3.4), squeeze=False
    )
    for ax, e in zip(axes[0], entries):
        z = np.asarray(e.z_mags)
        for i in range(z.shape[1]):
            ax.semilogy(e.z_times, np.maximum(z[:, i], 1e-300),
                        label=f"z{i}")
        ax.set_title(f"scaling {e.lam:g}")
        ax.set_xlabel("t")
    axes[0][0].set_ylabel("defect size (l1)")
    axes[0][-1].legend(fontsize=7)
    _finish(fig, path)


def save_growth(report, path) -> None:
    """H^s history plus the generation masses feeding it."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.5, 6), sharex=True)
    ax1.plot(report.times, report.sobolev ** 2)
    ax1.set_ylabel(f"squared H^{report.s:g} norm")
    ax1.set_title(
        f"realized ratio {report.realized_ratio:.4f}, "
        f"weight ratio {report.weight_ratio:.4f}"
    )
    for g in range(report.generation_mass.shape[1]):
        ax2.plot(report.times, report.generation_mass[:, g],
                 label=f"generation {g + 1}")
    ax2.set_xlabel("t")
    ax2.set_ylabel("generation mass")
    ax2.legend(fontsize=8)
    _finish(fig, path)
