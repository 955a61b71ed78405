"""Figure rendering for experiment reports.

Figures are written next to the delimited outputs; the Agg backend keeps
everything headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_policy_comparison(results, path: str | Path) -> None:
    """Bar chart of mean evaluation revenue per policy with one-sigma bars."""
    policies = [r.policy for r in results]
    means = [r.mean_revenue for r in results]
    stds = [r.std_revenue for r in results]

    fig, ax = plt.subplots(figsize=(1.4 * len(policies) + 2, 4))
    x = np.arange(len(policies))
    ax.bar(x, means, yerr=stds, capsize=4, color="#4878a8")
    for xi, r in zip(x, results):
        ax.annotate(f"{r.delta_pct:+.1f}%", (xi, r.mean_revenue),
                    textcoords="offset points", xytext=(0, 6), ha="center", fontsize=9)
    ax.set_xticks(x)
    ax.set_xticklabels(policies, rotation=20)
    ax.set_ylabel("mean revenue per evaluation run")
    ax.set_title("Policy comparison (delta vs F&N-E)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_revenue_curves(streams_by_policy: dict, epoch_seconds: float,
                        path: str | Path) -> None:
    """Cumulative revenue over time, averaged over seeds, one line per policy."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for policy, streams in streams_by_policy.items():
        if not streams:
            continue
        n = min(len(s) for s in streams)
        per_seed = np.array([[m.revenue for m in s[:n]] for s in streams])
        mean_curve = per_seed.mean(axis=0).cumsum()
        minutes = (np.arange(n) + 1) * epoch_seconds / 60.0
        ax.plot(minutes, mean_curve, label=policy)
    ax.set_xlabel("simulated minutes")
    ax.set_ylabel("cumulative revenue (mean over seeds)")
    ax.set_title("Revenue over time")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
