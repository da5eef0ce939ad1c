"""Snapshot-level orchestration shared by the CLI and the HTTP service, so
both surfaces produce bit-identical metrics."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Optional, Sequence

from . import ecoservices, routing, scoring
from .ecoservices import (
    AllometricModel,
    ArchetypeKey,
    ArchetypePerformance,
    CoolingResult,
)
from .errors import UnknownArchetypeError, VerdantError
from .greening import PlantingScenario
from .ingest import Snapshot, TreeRecord
from .routing import RoadGraph
from .scoring import ScoringWeights, SegmentAttributes


@dataclass
class TreeMetrics:
    tree: TreeRecord
    agb_kg: float
    co2e_kg: float
    cooling: Optional[CoolingResult]
    cooling_error: Optional[str]
    archetype: ArchetypeKey

    def to_row(self) -> dict:
        return {
            "id": self.tree.id,
            "agb_kg": self.agb_kg,
            "co2e_kg": self.co2e_kg,
            "c_eff": self.cooling.c_eff if self.cooling else None,
            "h_relief": self.cooling.h_relief if self.cooling else None,
            "archetype_label": self.archetype.label,
        }


@dataclass
class Analysis:
    metrics: list[TreeMetrics]
    archetypes: dict[str, ArchetypeKey]
    frequencies: dict[str, list[tuple[str, int]]]
    performance: list[ArchetypePerformance]
    attributes: list[SegmentAttributes]
    scores: dict[str, tuple[float, float]]  # segment_id -> (seq, serenity)

    def co2e_by_id(self) -> dict[str, float]:
        return {m.tree.id: m.co2e_kg for m in self.metrics}

    def cooling_by_id(self) -> dict[str, CoolingResult]:
        return {m.tree.id: m.cooling for m in self.metrics if m.cooling is not None}


def analyze(
    snapshot: Snapshot,
    extra_trees: Sequence[TreeRecord] = (),
    weights: ScoringWeights = ScoringWeights(),
    buffer_m: float = ecoservices.DEFAULT_BUFFER_M,
    min_sample: int = ecoservices.DEFAULT_MIN_SAMPLE,
    membership_buffer_m: float = scoring.DEFAULT_MEMBERSHIP_BUFFER_M,
    allometric: AllometricModel = AllometricModel(),
) -> Analysis:
    """Full per-tree and per-segment analysis over the snapshot plus any
    accepted citizen trees. Trees whose cooling is undefined keep their error
    code in the row instead of a silent zero."""
    trees = list(snapshot.trees) + list(extra_trees)

    archetypes, frequencies = ecoservices.classify_archetypes(trees)

    metrics: list[TreeMetrics] = []
    cooling_by_id: dict[str, CoolingResult] = {}
    for tree in trees:
        info = snapshot.species.get(tree.species)
        if info is not None:
            agb = ecoservices.compute_agb(tree, info, allometric)
            co2e = ecoservices.agb_to_co2e(agb).co2e_kg
        else:
            agb = co2e = 0.0
        cooling = None
        cooling_error = None
        if snapshot.scene is not None:
            try:
                cooling = ecoservices.cooling_metrics(
                    tree, snapshot.scene, buffer_m=buffer_m, min_sample=min_sample
                )
                cooling_by_id[tree.id] = cooling
            except VerdantError as exc:
                cooling_error = exc.code
        metrics.append(
            TreeMetrics(
                tree=tree,
                agb_kg=agb,
                co2e_kg=co2e,
                cooling=cooling,
                cooling_error=cooling_error,
                archetype=archetypes[tree.id],
            )
        )

    performance = ecoservices.archetype_performance(archetypes, cooling_by_id)

    attributes: list[SegmentAttributes] = []
    scores: dict[str, tuple[float, float]] = {}
    if snapshot.roads is not None and snapshot.roads.segments:
        co2e_by_id = {m.tree.id: m.co2e_kg for m in metrics}
        attributes = scoring.aggregate_segment_attributes(
            trees, co2e_by_id, snapshot.roads, buffer_m=membership_buffer_m
        )
        scores = scoring.score_segments(attributes, weights)

    return Analysis(
        metrics=metrics,
        archetypes=archetypes,
        frequencies=frequencies,
        performance=performance,
        attributes=attributes,
        scores=scores,
    )


def build_scored_graph(snapshot: Snapshot, analysis: Analysis) -> RoadGraph:
    if snapshot.roads is None:
        raise VerdantError("snapshot has no road network")
    return routing.build_graph(snapshot.roads, analysis.scores)


@dataclass
class ArchetypeCatalogEntry:
    label: str
    species: str
    count: int
    mean_c_eff: Optional[float]
    mean_h_relief: Optional[float]
    median_canopy_m: float

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "species": self.species,
            "count": self.count,
            "mean_c_eff": self.mean_c_eff,
            "mean_h_relief": self.mean_h_relief,
            "median_canopy_m": self.median_canopy_m,
        }


def archetype_catalog(analysis: Analysis) -> list[ArchetypeCatalogEntry]:
    """One row per archetype label with the member count, cooling means and
    the representative (median) canopy diameter, sorted like the performance
    table: cooling efficacy descending, uncooled archetypes last."""
    perf_by_label = {p.label: p for p in analysis.performance}
    members: dict[str, list[TreeMetrics]] = {}
    for m in analysis.metrics:
        members.setdefault(m.archetype.label, []).append(m)

    entries = []
    for label, group in members.items():
        perf = perf_by_label.get(label)
        entries.append(
            ArchetypeCatalogEntry(
                label=label,
                species=group[0].archetype.species,
                count=len(group),
                mean_c_eff=perf.mean_c_eff if perf else None,
                mean_h_relief=perf.mean_h_relief if perf else None,
                median_canopy_m=statistics.median(
                    m.tree.canopy_diameter_m for m in group
                ),
            )
        )
    entries.sort(
        key=lambda e: (
            0 if e.mean_c_eff is not None else 1,
            -(e.mean_c_eff if e.mean_c_eff is not None else 0.0),
            e.label,
        )
    )
    return entries


def scenario_for_archetype(
    analysis: Analysis, label: str, polygon: Sequence[tuple[float, float]]
) -> PlantingScenario:
    """Planting scenario for one archetype: representative canopy diameter is
    the median over members, cooling efficacy the archetype mean."""
    for entry in archetype_catalog(analysis):
        if entry.label == label:
            if entry.mean_c_eff is None:
                raise UnknownArchetypeError(
                    f"archetype {label!r} has no cooling statistics"
                )
            if entry.median_canopy_m <= 0:
                raise UnknownArchetypeError(
                    f"archetype {label!r} has no canopy extent to plant"
                )
            return PlantingScenario(
                polygon=tuple((float(x), float(y)) for x, y in polygon),
                archetype_label=label,
                canopy_diameter_m=entry.median_canopy_m,
                c_eff_arch=entry.mean_c_eff,
            )
    raise UnknownArchetypeError(f"unknown archetype: {label!r}")
