"""Report figures, rendered off-screen to PNG files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

CLUSTER_COLORS = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown"]


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def correlation_panels(real_corr, synth_corr, diff, columns, path, title=""):
    """Real, synthetic and absolute-difference correlation matrices side by side."""
    fig, axes = plt.subplots(1, 3, figsize=(15, 4.8))
    panels = [(real_corr, "real", "RdBu_r", -1, 1), (synth_corr, "synthetic", "RdBu_r", -1, 1),
              (diff, "|real - synthetic|", "magma", 0, max(float(np.max(diff)), 1e-12))]
    for ax, (mat, name, cmap, lo, hi) in zip(axes, panels):
        im = ax.imshow(mat, cmap=cmap, vmin=lo, vmax=hi, interpolation="none")
        ax.set_title(name)
        ticks = np.arange(0, len(columns), max(1, len(columns) // 10))
        ax.set_xticks(ticks)
        ax.set_xticklabels([columns[i] for i in ticks], rotation=90, fontsize=7)
        ax.set_yticks(ticks)
        ax.set_yticklabels([columns[i] for i in ticks], fontsize=7)
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def marginal_densities(histograms: dict, path, ncols: int = 6, title=""):
    """One small panel per column: real and synthetic step densities on shared bins."""
    names = list(histograms)
    nrows = -(-len(names) // ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(2.6 * ncols, 2.0 * nrows), squeeze=False)
    for ax in axes.ravel()[len(names):]:
        ax.set_visible(False)
    for ax, name in zip(axes.ravel(), names):
        h = histograms[name]
        ax.stairs(h.real, h.edges, label="real", color="0.3", fill=True, alpha=0.35)
        ax.stairs(h.synth, h.edges, label="synthetic", color="tab:red", linewidth=1.2)
        ax.set_title(name, fontsize=8)
        ax.tick_params(labelsize=6)
    axes[0, 0].legend(fontsize=6, frameon=False)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def sweep_boxplots(frame, path, metric: str = "f1"):
    """Per-factor boxplots of ``metric`` over seeds, one panel per swept factor."""
    factors = list(dict.fromkeys(frame["factor"]))
    fig, axes = plt.subplots(1, len(factors), figsize=(3.2 * len(factors), 3.2), squeeze=False)
    for ax, factor in zip(axes[0], factors):
        sub = frame[frame["factor"] == factor]
        values = list(dict.fromkeys(sub["value"]))
        ax.boxplot([sub.loc[sub["value"] == v, metric].to_numpy() for v in values])
        ax.set_xticks(range(1, len(values) + 1))
        ax.set_xticklabels([f"{v:g}" if isinstance(v, float) else str(v) for v in values], fontsize=7)
        ax.set_xlabel(factor)
        ax.set_ylabel(metric)
    fig.tight_layout()
    return _save(fig, path)


def cluster_scatter(coords, labels, path, title="minority layout"):
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    for c in np.unique(labels):
        pts = coords[labels == c]
        ax.scatter(pts[:, 0], pts[:, 1], s=9, color=CLUSTER_COLORS[int(c) % len(CLUSTER_COLORS)],
                   label=f"cluster {int(c) + 1} (n={len(pts)})")
    ax.set_title(title)
    ax.legend(fontsize=7, frameon=False)
    ax.set_xticks([])
    ax.set_yticks([])
    return _save(fig, path)


def loss_curves(traces: dict, path):
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    for name, trace in traces.items():
        ax.plot(np.arange(1, len(trace) + 1), trace, label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("noise MSE")
    ax.set_yscale("log")
    ax.legend(fontsize=7, frameon=False)
    return _save(fig, path)
