"""Matplotlib renderings of benchmark tables and score summaries.

Everything draws on the Agg backend and writes PNG files next to the
delimited outputs; no interactive windows.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_regret_figure", "save_marginals_figure", "save_summary_figure"]


def save_regret_figure(result, path: str | Path) -> Path:
    """Log-log regret vs horizon: per-seed scatter plus the median line."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for t in result.horizons:
        vals = np.asarray(result.per_seed[t])
        ax.scatter(np.full(vals.size, t), np.maximum(vals, 1e-12), s=8, alpha=0.35, color="tab:gray")
    meds = np.maximum(np.asarray(result.medians), 1e-12)
    ax.plot(result.horizons, meds, "o-", color="tab:blue", label="median")
    if len(result.horizons) >= 2 and meds[0] > 0:
        ref = meds[0] * np.sqrt(np.asarray(result.horizons) / result.horizons[0])
        ax.plot(result.horizons, ref, "--", color="tab:orange", label=r"$\sqrt{T}$ reference")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("sampler regret")
    ax.set_title(f"n={result.n}, k={result.k}, {result.loss_model}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_marginals_figure(result, path: str | Path) -> Path:
    """Log-log TV(exact, approx) vs ground-set size, with a 1/n guide."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for n in result.ns:
        vals = np.asarray(result.per_seed[n])
        ax.scatter(np.full(vals.size, n), np.maximum(vals, 1e-16), s=8, alpha=0.35, color="tab:gray")
    meds = np.maximum(np.asarray(result.medians), 1e-16)
    ax.plot(result.ns, meds, "o-", color="tab:blue", label="median TV")
    if meds[0] > 0:
        ref = meds[0] * result.ns[0] / np.asarray(result.ns, dtype=float)
        ax.plot(result.ns, ref, "--", color="tab:orange", label="1/n reference")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("ground-set size n")
    ax.set_ylabel("TV(exact, approx)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_summary_figure(summary_rows: list[dict], path: str | Path) -> Path:
    """Grouped bars of normalized scores, one panel per metric."""
    path = Path(path)
    metrics = sorted({row["metric"] for row in summary_rows})
    if not metrics:
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.text(0.5, 0.5, "no final records", ha="center", va="center")
        ax.set_axis_off()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return path
    fig, axes = plt.subplots(
        len(metrics), 1, figsize=(7, 3 * len(metrics)), squeeze=False
    )
    for ax, metric in zip(axes[:, 0], metrics):
        rows = [r for r in summary_rows if r["metric"] == metric]
        datasets = sorted({r["dataset"] for r in rows})
        algorithms = sorted({r["algorithm"] for r in rows})
        width = 0.8 / max(len(algorithms), 1)
        xs = np.arange(len(datasets), dtype=float)
        for j, algorithm in enumerate(algorithms):
            heights, errs = [], []
            for dataset in datasets:
                match = [
                    r for r in rows
                    if r["dataset"] == dataset and r["algorithm"] == algorithm
                ]
                heights.append(match[0]["normalized_mean"] if match else 0.0)
                errs.append(match[0]["normalized_sd"] if match else 0.0)
            ax.bar(xs + j * width, heights, width, yerr=errs, capsize=2, label=algorithm)
        ax.set_xticks(xs + 0.4 - width / 2)
        ax.set_xticklabels(datasets, rotation=15)
        ax.set_ylabel("normalized score")
        ax.set_title(metric)
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
