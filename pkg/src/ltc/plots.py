"""Figure rendering for the analytics reports.

Each analyze subcommand writes a tidy CSV and a PNG next to it; these
helpers own the PNG side. Rendering is intentionally thin: every figure
is a straight view of one CSV's rows.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_ratio_series(series_by_type: dict[str, list[tuple[int, float | None]]],
                      path, bin_width: int = 5) -> None:
    fig, ax = plt.subplots(figsize=(9, 4))
    for name, series in series_by_type.items():
        xs = [b for b, v in series if v is not None]
        ys = [v for _, v in series if v is not None]
        ax.plot(xs, ys, marker=".", linewidth=1.2, label=name)
    ax.set_xlabel("year")
    ax.set_ylabel(f"share of activities per {bin_width}-year bin")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_departures(series, path) -> None:
    """Stacked per-type departure ratios by bin."""
    bins = [b for b in series.bin_starts if series.travels.get(b)]
    fig, ax = plt.subplots(figsize=(9, 4))
    bottom = np.zeros(len(bins))
    for t in series.type_order:
        vals = np.array([series.stacked_ratios(b).get(t, 0.0) for b in bins])
        ax.bar(bins, vals, width=4, bottom=bottom, label=t)
        bottom += vals
    ax.set_xlabel("year of arrival")
    ax.set_ylabel("international departures / travels from home")
    if series.type_order:
        ax.legend(fontsize="small", ncol=3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_life_stages(hist, path) -> None:
    from .analytics import LIFE_STAGE_TYPES

    groups = hist.age_groups
    fig, ax = plt.subplots(figsize=(9, 4))
    bottom = np.zeros(len(groups))
    for t in list(LIFE_STAGE_TYPES) + ["Other"]:
        vals = np.array([hist.counts.get(g, {}).get(t, 0) for g in groups], dtype=float)
        ax.bar(groups, vals, width=8, bottom=bottom, label=t)
        bottom += vals
    ax.set_xlabel("age group")
    ax.set_ylabel("activities")
    ax.set_xticks(groups, [f"{g}-{g + 9}" for g in groups])
    ax.legend(fontsize="small", ncol=3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_distance_distribution(dists: dict, path) -> None:
    """Overlaid histograms of birth-to-activity distances (log x)."""
    fig, ax = plt.subplots(figsize=(9, 4))
    for name, dist in dists.items():
        centers = [(dist.bin_edges[i] + dist.bin_edges[i + 1]) / 2
                   for i in range(len(dist.bin_counts))]
        ax.plot(centers, dist.bin_counts, marker=".",
                label=f"{name} (mean {dist.mean_km:.0f} km)")
    ax.set_xscale("symlog", linthresh=1.0)
    ax.set_xlabel("distance from birthplace (km)")
    ax.set_ylabel("activities")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
