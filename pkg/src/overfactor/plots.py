"""Matplotlib rendering of run artifacts to PNG files (batch only, no GUI)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_overfit_curves",
    "render_heatmap",
    "render_scaling",
    "render_ratio_histogram",
]


def render_overfit_curves(traj, path, t_hat=None, t_tilde=None) -> None:
    ts = [rec.t for rec in traj.records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(ts, [rec.train_loss for rec in traj.records], label="training loss", color="tab:blue")
    if traj.records[0].val_loss is not None:
        ax.semilogy(ts, [rec.val_loss for rec in traj.records], label="validation loss", color="tab:red")
    if traj.records[0].recovery_error is not None:
        ax.semilogy(ts, [rec.recovery_error for rec in traj.records], label="recovery error", color="black")
    if t_tilde is not None:
        ax.axvline(t_tilde, color="gray", linestyle="--", linewidth=1, label=r"oracle $\tilde{t}$")
    if t_hat is not None:
        ax.axvline(t_hat, color="tab:green", linestyle=":", linewidth=1.2, label=r"selected $\hat{t}$")
    ax.set_xlabel("iteration")
    ax.set_ylabel("value (log scale)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_heatmap(matrix, rank_values, sigma2_values, path, title="") -> None:
    """Grayscale error heatmap; whiter cells mean lower (better) error."""
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(np.asarray(matrix), cmap="gray_r", aspect="auto", origin="lower")
    ax.set_yticks(range(len(rank_values)), [str(r) for r in rank_values])
    ax.set_xticks(range(len(sigma2_values)),
                  [format(s, ".3g") for s in sigma2_values], rotation=45)
    ax.set_ylabel(r"true rank $r_*$")
    ax.set_xlabel(r"noise variance $\sigma^2$")
    if title:
        ax.set_title(title, fontsize=10)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_scaling(values, means, slope, axis, path) -> None:
    values = np.asarray(values, float)
    means = np.asarray(means, float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(values, means, "o-", label="mean selected error")
    anchor = means[0] * (values / values[0]) ** slope
    ax.loglog(values, anchor, "--", color="gray", label=f"slope {slope:.2f}")
    ax.set_xlabel(axis)
    ax.set_ylabel("mean selected recovery error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_ratio_histogram(ratios, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.hist(np.asarray(ratios), bins=40, color="tab:blue", alpha=0.8)
    ax.axvline(1.0, color="black", linewidth=1)
    ax.set_xlabel("isometry ratio")
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
