"""Report figures rendered to files alongside the delimited outputs."""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.collections import LineCollection

from .pipeline import Analysis
from .routing import EmissionsModel, emissions_factor


def plot_attribute_distributions(analysis: Analysis, path: str) -> None:
    """Three-panel histogram of the raw segment attributes; their skew is the
    reason the scores use a rank-based transform."""
    attrs = analysis.attributes
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    panels = [
        ("Canopy area (m$^2$)", [a.canopy_area_m2 for a in attrs]),
        ("CO$_2$ sequestered (kg)", [a.co2_kg for a in attrs]),
        ("Species count", [a.species_count for a in attrs]),
    ]
    for ax, (label, values) in zip(axes, panels):
        ax.hist(values, bins=min(20, max(5, len(values) // 2 or 5)), color="#4a7c59")
        ax.set_xlabel(label)
        ax.set_ylabel("segments")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_emissions_curve(path: str, model: EmissionsModel = EmissionsModel()) -> None:
    """U-shaped emissions factor against speed with the optimum marked."""
    v = np.linspace(5.0, 120.0, 300)
    ef = [emissions_factor(model, float(s)) for s in v]
    v_opt = model.optimal_speed_kmh()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(v, ef, color="#2b5797")
    if np.isfinite(v_opt):
        ax.axvline(v_opt, color="#c0504d", linestyle="--", linewidth=1)
        ax.annotate(
            f"optimum {v_opt:.1f} km/h",
            xy=(v_opt, emissions_factor(model, v_opt)),
            xytext=(v_opt + 5, emissions_factor(model, v_opt) + 10),
            fontsize=9,
        )
    ax.set_xlabel("average speed (km/h)")
    ax.set_ylabel("emissions factor (g/km)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_archetype_performance(analysis: Analysis, path: str) -> None:
    rows = analysis.performance
    fig, ax = plt.subplots(figsize=(8, max(2.5, 0.5 * len(rows) + 1.5)))
    if rows:
        labels = [r.label for r in rows][::-1]
        ceff = [r.mean_c_eff for r in rows][::-1]
        hrel = [r.mean_h_relief for r in rows][::-1]
        y = np.arange(len(rows))
        ax.barh(y + 0.2, ceff, height=0.4, color="#4a7c59", label="cooling efficacy")
        ax.barh(y - 0.2, hrel, height=0.4, color="#9cbf9e", label="heat relief")
        ax.set_yticks(y)
        ax.set_yticklabels(labels, fontsize=8)
        ax.legend(fontsize=8)
    ax.set_xlabel("mean value (degC)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_score_map(snapshot, analysis: Analysis, path: str) -> None:
    """Street segments colored by SEQ score."""
    fig, ax = plt.subplots(figsize=(7, 7))
    if snapshot.roads is not None and analysis.scores:
        lines = [list(seg.coords) for seg in snapshot.roads.segments]
        seq = np.array([analysis.scores[seg.id][0] for seg in snapshot.roads.segments])
        lc = LineCollection(lines, cmap="RdYlGn", linewidths=2)
        lc.set_array(seq)
        lc.set_clim(0.0, 1.0)
        ax.add_collection(lc)
        ax.autoscale()
        fig.colorbar(lc, ax=ax, label="SEQ")
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
