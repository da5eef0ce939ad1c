"""Per-tree ecosystem services: allometric biomass and the CO2 chain, the
percentile cooling metrics, and archetype classification.

Cooling compares a tree pixel's land surface temperature against the 90th and
10th percentile of non-vegetated pixels in a surrounding buffer; the buffer
sample is the tree's localized thermal baseline.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientBaselineError, OutsideSceneError
from .ingest import RasterScene, SpeciesInfo, TreeRecord

ROOT_SHOOT_FACTOR = 0.26  # below-ground biomass as fraction of AGB
CARBON_FRACTION = 0.50
CO2_PER_CARBON = 44.0 / 12.0

DEFAULT_BUFFER_M = 250.0
DEFAULT_MIN_SAMPLE = 10
VARIOUS_LABEL = "Various Other Sizes"


@dataclass(frozen=True)
class AllometricModel:
    """AGB = coefficient * (rho * D^2 * H) ** exponent, with rho in g/cm^3,
    D in cm, H in m. Coefficients are configurable so other calibrations can
    be swapped in without code change."""

    coefficient: float = 0.0673
    exponent: float = 0.976


@dataclass(frozen=True)
class CarbonResult:
    agb_kg: float
    total_biomass_kg: float
    carbon_kg: float
    co2e_kg: float

    def to_dict(self) -> dict:
        return {
            "agb_kg": self.agb_kg,
            "total_biomass_kg": self.total_biomass_kg,
            "carbon_kg": self.carbon_kg,
            "co2e_kg": self.co2e_kg,
        }


@dataclass(frozen=True)
class CoolingResult:
    c_eff: float  # maximum cooling efficacy, degC
    h_relief: float  # ambient heat relief, degC
    n_nv_pixels: int
    tree_lst: float

    def to_dict(self) -> dict:
        return {
            "c_eff": self.c_eff,
            "h_relief": self.h_relief,
            "n_nv_pixels": self.n_nv_pixels,
            "tree_lst": self.tree_lst,
        }


@dataclass(frozen=True)
class ArchetypeKey:
    species: str
    height_q: Optional[int]  # 1..4
    girth_q: Optional[int]
    canopy_q: Optional[int]
    label: str
    primary: bool

    def to_dict(self) -> dict:
        return {
            "species": self.species,
            "height_q": self.height_q,
            "girth_q": self.girth_q,
            "canopy_q": self.canopy_q,
            "label": self.label,
            "primary": self.primary,
        }


def dbh_cm_from_girth(girth_cm: float) -> float:
    return girth_cm / math.pi


def compute_agb(
    tree: TreeRecord, species: SpeciesInfo, model: AllometricModel = AllometricModel()
) -> float:
    """Above-ground biomass in kg from the pantropical power-law form."""
    d_cm = dbh_cm_from_girth(tree.girth_cm)
    x = species.wood_density * d_cm * d_cm * tree.height_m
    if x <= 0:
        return 0.0
    return model.coefficient * x**model.exponent


def agb_to_co2e(agb_kg: float) -> CarbonResult:
    """Chain AGB through the root-to-shoot factor, the carbon fraction and the
    CO2/C molecular weight ratio. The composite multiplier is exactly 2.31."""
    if agb_kg < 0:
        raise ValueError("AGB cannot be negative")
    total = agb_kg * (1.0 + ROOT_SHOOT_FACTOR)
    carbon = total * CARBON_FRACTION
    co2e = carbon * CO2_PER_CARBON
    return CarbonResult(
        agb_kg=agb_kg, total_biomass_kg=total, carbon_kg=carbon, co2e_kg=co2e
    )


def interpolated_percentile(sorted_values: Sequence[float], p: float) -> float:
    """Percentile by linear interpolation between closest ranks: the zero-based
    rank is p/100 * (n-1). The input must already be sorted ascending."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("empty sample")
    if n == 1:
        return float(sorted_values[0])
    rank = p / 100.0 * (n - 1)
    lo = math.floor(rank)
    hi = math.ceil(rank)
    if lo == hi:
        return float(sorted_values[lo])
    frac = rank - lo
    return float(sorted_values[lo]) + frac * (
        float(sorted_values[hi]) - float(sorted_values[lo])
    )


def baseline_sample(
    tree_x: float, tree_y: float, scene: RasterScene, buffer_m: float
) -> list[float]:
    """LST values of non-vegetated, non-missing cells whose center lies within
    buffer_m of the point, excluding the cell containing the point itself."""
    own = scene.cell_index(tree_x, tree_y)
    cs = scene.cell_size
    col_lo = max(0, math.floor((tree_x - buffer_m - scene.origin_x) / cs))
    col_hi = min(scene.cols - 1, math.ceil((tree_x + buffer_m - scene.origin_x) / cs))
    rb_lo = max(0, math.floor((tree_y - buffer_m - scene.origin_y) / cs))
    rb_hi = min(scene.rows - 1, math.ceil((tree_y + buffer_m - scene.origin_y) / cs))

    sample: list[float] = []
    buf2 = buffer_m * buffer_m
    for rb in range(rb_lo, rb_hi + 1):
        row = scene.rows - 1 - rb
        cy = scene.origin_y + (rb + 0.5) * cs
        dy2 = (cy - tree_y) ** 2
        for col in range(col_lo, col_hi + 1):
            if own is not None and (row, col) == own:
                continue
            if not scene.nv_mask[row, col]:
                continue
            v = scene.lst[row, col]
            if math.isnan(v):
                continue
            cx = scene.origin_x + (col + 0.5) * cs
            if (cx - tree_x) ** 2 + dy2 <= buf2:
                sample.append(float(v))
    return sample


def cooling_metrics(
    tree: TreeRecord,
    scene: RasterScene,
    buffer_m: float = DEFAULT_BUFFER_M,
    min_sample: int = DEFAULT_MIN_SAMPLE,
) -> CoolingResult:
    """Cooling efficacy (P90 of baseline minus tree LST) and ambient heat
    relief (P10 minus tree LST) for one tree.

    Raises OutsideSceneError when the tree's own pixel is missing or outside
    the grid, and InsufficientBaselineError when the buffer holds fewer than
    min_sample usable non-vegetated pixels: a tiny sample would make the
    percentiles noise, so the metric is undefined rather than zero.
    """
    own = scene.cell_index(tree.x, tree.y)
    if own is None:
        raise OutsideSceneError(f"tree {tree.id} lies outside the raster extent")
    tree_lst = scene.lst[own]
    if math.isnan(tree_lst):
        raise OutsideSceneError(f"tree {tree.id}: no LST at its own pixel")

    sample = baseline_sample(tree.x, tree.y, scene, buffer_m)
    if len(sample) < min_sample:
        raise InsufficientBaselineError(
            f"tree {tree.id}: only {len(sample)} non-vegetated pixels within "
            f"{buffer_m} m (minimum {min_sample})",
            n_nv_pixels=len(sample),
        )
    sample.sort()
    p90 = interpolated_percentile(sample, 90.0)
    p10 = interpolated_percentile(sample, 10.0)
    return CoolingResult(
        c_eff=p90 - float(tree_lst),
        h_relief=p10 - float(tree_lst),
        n_nv_pixels=len(sample),
        tree_lst=float(tree_lst),
    )


def _quartile_of(value: float, cutoffs: tuple[float, float, float]) -> int:
    # boundary values go to the lower bin
    q = 1
    for c in cutoffs:
        if value > c:
            q += 1
    return q


def _cutoffs(values: list[float]) -> tuple[float, float, float]:
    s = sorted(values)
    return (
        interpolated_percentile(s, 25.0),
        interpolated_percentile(s, 50.0),
        interpolated_percentile(s, 75.0),
    )


def archetype_label(species: str, hq: int, gq: int, cq: int) -> str:
    return f"{species} - Height:Q{hq}, Girth:Q{gq}, Canopy:Q{cq}"


def various_label(species: str) -> str:
    return f"{species} - {VARIOUS_LABEL}"


def classify_archetypes(
    trees: Sequence[TreeRecord], top_k: int = 4
) -> tuple[dict[str, ArchetypeKey], dict[str, list[tuple[str, int]]]]:
    """Species-specific quartile binning of height, girth and canopy, composed
    into archetype keys.

    Per species the top_k most frequent composite keys are the primary
    archetypes; everything else (and every tree of a species with fewer than
    4 specimens, whose quartiles would be meaningless) is grouped under the
    catch-all label. Returns (assignment per tree id, per-species frequency
    table sorted by count descending).
    """
    by_species: dict[str, list[TreeRecord]] = {}
    for t in trees:
        by_species.setdefault(t.species, []).append(t)

    assignments: dict[str, ArchetypeKey] = {}
    frequencies: dict[str, list[tuple[str, int]]] = {}

    for species in sorted(by_species):
        members = by_species[species]
        if len(members) < 4:
            label = various_label(species)
            for t in members:
                assignments[t.id] = ArchetypeKey(
                    species=species,
                    height_q=None,
                    girth_q=None,
                    canopy_q=None,
                    label=label,
                    primary=False,
                )
            frequencies[species] = [(label, len(members))]
            continue

        h_cut = _cutoffs([t.height_m for t in members])
        g_cut = _cutoffs([t.girth_cm for t in members])
        c_cut = _cutoffs([t.canopy_diameter_m for t in members])

        quartiles = {
            t.id: (
                _quartile_of(t.height_m, h_cut),
                _quartile_of(t.girth_cm, g_cut),
                _quartile_of(t.canopy_diameter_m, c_cut),
            )
            for t in members
        }
        counts = Counter(quartiles.values())
        # deterministic: count desc, then key ascending
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        primary_keys = {key for key, _ in ranked[:top_k]}

        freq_rows: list[tuple[str, int]] = []
        various_count = 0
        for key, count in ranked:
            if key in primary_keys:
                freq_rows.append((archetype_label(species, *key), count))
            else:
                various_count += count
        if various_count:
            freq_rows.append((various_label(species), various_count))
        frequencies[species] = freq_rows

        for t in members:
            hq, gq, cq = quartiles[t.id]
            is_primary = (hq, gq, cq) in primary_keys
            assignments[t.id] = ArchetypeKey(
                species=species,
                height_q=hq,
                girth_q=gq,
                canopy_q=cq,
                label=archetype_label(species, hq, gq, cq)
                if is_primary
                else various_label(species),
                primary=is_primary,
            )
    return assignments, frequencies


@dataclass(frozen=True)
class ArchetypePerformance:
    label: str
    mean_c_eff: float
    mean_h_relief: float
    count: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "mean_c_eff": self.mean_c_eff,
            "mean_h_relief": self.mean_h_relief,
            "count": self.count,
        }


def archetype_performance(
    archetypes: dict[str, ArchetypeKey],
    cooling_results: dict[str, CoolingResult],
) -> list[ArchetypePerformance]:
    """Mean cooling metrics per archetype label, sorted by mean cooling
    efficacy descending. Archetypes with no cooled member are dropped with a
    warning since their means are undefined."""
    grouped: dict[str, list[CoolingResult]] = {}
    member_labels = set()
    for tree_id, key in archetypes.items():
        member_labels.add(key.label)
        result = cooling_results.get(tree_id)
        if result is not None:
            grouped.setdefault(key.label, []).append(result)

    for label in sorted(member_labels - set(grouped)):
        warnings.warn(f"archetype {label!r} has no cooled members; omitted")

    rows = [
        ArchetypePerformance(
            label=label,
            mean_c_eff=float(np.mean([r.c_eff for r in results])),
            mean_h_relief=float(np.mean([r.h_relief for r in results])),
            count=len(results),
        )
        for label, results in grouped.items()
    ]
    rows.sort(key=lambda r: (-r.mean_c_eff, r.label))
    return rows
