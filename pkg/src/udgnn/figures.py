"""Matplotlib renderings written alongside the delimited outputs.

These are convenience figures for eyeballing runs; the deterministic,
diff-friendly artifact is the SVG chart in :mod:`udgnn.svgchart`.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def training_curves_png(report, path) -> None:
    """Train loss and validation accuracy over epochs."""
    epochs = range(1, report.n_epochs + 1)
    fig, ax1 = plt.subplots(figsize=(7, 4.5))
    ax1.plot(epochs, report.train_loss, color="tab:blue", label="train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(epochs, report.val_acc, color="tab:red", label="val accuracy")
    ax2.set_ylabel("val accuracy", color="tab:red")
    ax2.set_ylim(0, 1)
    ax1.axvline(report.best_epoch, color="gray", linestyle=":", linewidth=1)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def gate_dynamics_png(report, path) -> None:
    """Evolution of |alpha_l| (and |beta_l| when present) per layer."""
    if not report.gate_abs_alpha or not report.gate_abs_alpha[0]:
        return
    alphas = list(zip(*report.gate_abs_alpha))  # layer -> series
    betas = list(zip(*report.gate_abs_beta)) if report.gate_abs_beta and report.gate_abs_beta[0] else []
    n_panels = 2 if betas else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(6 * n_panels, 4), squeeze=False)
    epochs = range(1, report.n_epochs + 1)
    for l, series in enumerate(alphas):
        axes[0][0].plot(epochs, series, alpha=0.6)
    axes[0][0].set_title("|alpha| per layer")
    axes[0][0].set_xlabel("epoch")
    for l, series in enumerate(betas):
        axes[0][1].plot(epochs, series, alpha=0.6)
    if betas:
        axes[0][1].set_title("|beta| per layer")
        axes[0][1].set_xlabel("epoch")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def depth_curves_png(rows, path) -> None:
    """Mean test accuracy vs depth, one line per sweep variant."""
    series = {}
    for row in rows:
        series.setdefault(row["variant"], {}).setdefault(row["depth"], []).append(row["test_acc"])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for variant in sorted(series):
        pts = sorted((d, sum(v) / len(v)) for d, v in series[variant].items())
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=variant)
    ax.set_xlabel("depth")
    ax.set_ylabel("test accuracy")
    ax.set_xscale("log", base=2)
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def diagnostics_png(records, path) -> None:
    """ConvRatio and gradient entropy per layer at the last logged epoch."""
    if not records:
        return
    last = max(r.epoch for r in records)
    rows = [r for r in records if r.epoch == last]
    layers = [r.layer for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    axes[0].plot(layers, [r.conv_ratio for r in rows], marker="o")
    axes[0].set_xlabel("layer")
    axes[0].set_title(f"ConvRatio (epoch {last})")
    ent = [(r.layer, r.grad_entropy) for r in rows if r.grad_entropy is not None]
    if ent:
        axes[1].plot([e[0] for e in ent], [e[1] for e in ent], marker="o", color="tab:red")
    axes[1].set_xlabel("layer")
    axes[1].set_ylim(0, 1.05)
    axes[1].set_title(f"grad von Neumann entropy (epoch {last})")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)
