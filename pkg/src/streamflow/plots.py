"""Figure rendering for the CLI report path.

Every figure lands next to its CSV: envelope plots for path statistics,
scatter panels for generated samples, error-bar charts for benchmark
summaries.  Rendering uses the Agg backend so it works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 130


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, metadata={"Software": None})
    plt.close(fig)


def plot_path_stats(rows, path) -> None:
    """Mean +- 2 sd envelopes of position and velocity over time."""
    rows = np.asarray(rows, dtype=float)
    dims = sorted(set(int(r) for r in rows[:, 1]))
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharex=True)
    for dim in dims:
        sub = rows[rows[:, 1] == dim]
        t = sub[:, 0]
        for ax, (mcol, scol, label) in zip(
            axes, [(2, 3, "position"), (4, 5, "velocity")]
        ):
            ax.plot(t, sub[:, mcol], label=f"dim {dim}")
            ax.fill_between(t, sub[:, mcol] - 2 * sub[:, scol],
                            sub[:, mcol] + 2 * sub[:, scol], alpha=0.2)
            ax.set_xlabel("t")
            ax.set_title(label)
    axes[0].legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_samples(stops, batches, path, reference=None) -> None:
    """Scatter panels of generated batches, one per stop time."""
    n = len(stops)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.2), squeeze=False)
    for ax, t, batch in zip(axes[0], stops, batches):
        batch = np.atleast_2d(batch)
        if batch.shape[1] == 1:
            ax.hist(batch[:, 0], bins=40, alpha=0.7)
        else:
            if reference is not None:
                ref = np.atleast_2d(reference)
                ax.scatter(ref[:, 0], ref[:, 1], s=4, alpha=0.25, label="reference")
            ax.scatter(batch[:, 0], batch[:, 1], s=4, alpha=0.5, label="generated")
            ax.legend(loc="best", fontsize=7)
        ax.set_title(f"t = {t:g}")
    fig.tight_layout()
    _save(fig, path)


def plot_summary(rows, path) -> None:
    """Mean W2 per variant with standard-error bars."""
    labels = ["/".join(str(k) for k in key) for key, _, _, _ in rows]
    means = [m for _, m, _, _ in rows]
    ses = [s for _, _, s, _ in rows]
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(rows)), 3.5))
    ax.bar(range(len(rows)), means, yerr=ses, capsize=4, alpha=0.8)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("W2")
    fig.tight_layout()
    _save(fig, path)


def plot_loss_trace(trace, path) -> None:
    trace = np.asarray(trace, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(trace[:, 0], trace[:, 1])
    ax.set_xlabel("iteration")
    ax.set_ylabel("batch loss")
    ax.set_yscale("log")
    fig.tight_layout()
    _save(fig, path)


def plot_dataset_slices(slices, times, path) -> None:
    """Layout figure for multi-slice datasets (documents the geometry)."""
    fig, ax = plt.subplots(figsize=(4.5, 4))
    colors = plt.cm.viridis(np.linspace(0, 0.9, len(times)))
    for sl, t, col in zip(slices, times, colors):
        if sl is None:
            continue
        sl = np.atleast_2d(sl)
        ax.scatter(sl[:, 0], sl[:, 1], s=8, color=col, label=f"t = {t:g}")
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    _save(fig, path)
