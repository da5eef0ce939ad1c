"""Street-segment environmental scores.

Raw attributes (canopy area, sequestered CO2, species richness in a 10 m
buffer) are normalized by a mid-rank empirical CDF, which is robust to the
heavily skewed, tie-ridden distributions urban tree data produces, then
combined as weighted sums: the SEQ score for vehicular routing and the
carbon-free Serenity score for pedestrian routing.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Mapping, Sequence

from .geometry import point_polyline_distance
from .ingest import RoadNetwork, TreeRecord

DEFAULT_MEMBERSHIP_BUFFER_M = 10.0


@dataclass(frozen=True)
class SegmentAttributes:
    segment_id: str
    canopy_area_m2: float
    co2_kg: float
    species_count: int

    def to_dict(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "canopy_area_m2": self.canopy_area_m2,
            "co2_kg": self.co2_kg,
            "species_count": self.species_count,
        }


@dataclass(frozen=True)
class ScoringWeights:
    """SEQ weights over (canopy, co2, biodiversity) and Serenity weights over
    (canopy, biodiversity); each set must lie on the simplex."""

    seq_canopy: float = 0.5
    seq_co2: float = 0.3
    seq_biodiversity: float = 0.2
    serenity_canopy: float = 0.7
    serenity_biodiversity: float = 0.3

    def __post_init__(self):
        for name in (
            "seq_canopy",
            "seq_co2",
            "seq_biodiversity",
            "serenity_canopy",
            "serenity_biodiversity",
        ):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if abs(self.seq_canopy + self.seq_co2 + self.seq_biodiversity - 1.0) > 1e-9:
            raise ValueError("SEQ weights must sum to 1")
        if abs(self.serenity_canopy + self.serenity_biodiversity - 1.0) > 1e-9:
            raise ValueError("Serenity weights must sum to 1")

    @classmethod
    def from_json(cls, path: str) -> "ScoringWeights":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        seq = doc.get("seq", {})
        ser = doc.get("serenity", {})
        return cls(
            seq_canopy=seq.get("canopy", 0.5),
            seq_co2=seq.get("co2", 0.3),
            seq_biodiversity=seq.get("biodiversity", 0.2),
            serenity_canopy=ser.get("canopy", 0.7),
            serenity_biodiversity=ser.get("biodiversity", 0.3),
        )


def canopy_area_m2(canopy_diameter_m: float) -> float:
    return math.pi * (canopy_diameter_m / 2.0) ** 2


def aggregate_segment_attributes(
    trees: Sequence[TreeRecord],
    co2e_kg_by_id: Mapping[str, float],
    roads: RoadNetwork,
    buffer_m: float = DEFAULT_MEMBERSHIP_BUFFER_M,
) -> list[SegmentAttributes]:
    """A tree belongs to every segment whose polyline passes within buffer_m
    of it; overlapping buffers are intentional, so no de-duplication. Segments
    without trees get all-zero attributes."""
    rows: list[SegmentAttributes] = []
    for seg in roads.segments:
        canopy = 0.0
        co2 = 0.0
        species: set[str] = set()
        for tree in trees:
            if point_polyline_distance(tree.x, tree.y, seg.coords) <= buffer_m:
                canopy += canopy_area_m2(tree.canopy_diameter_m)
                co2 += co2e_kg_by_id.get(tree.id, 0.0)
                species.add(tree.species)
        rows.append(
            SegmentAttributes(
                segment_id=seg.id,
                canopy_area_m2=canopy,
                co2_kg=co2,
                species_count=len(species),
            )
        )
    return rows


def quantile_transform(values: Sequence[float]) -> list[float]:
    """Mid-rank empirical CDF: score(x) = (#below + 0.5 * #equal) / n.

    Ties receive equal scores and the output stays strictly inside (0, 1),
    which keeps downstream edge costs positive.
    """
    n = len(values)
    if n == 0:
        raise ValueError("cannot quantile-transform an empty population")
    s = sorted(values)
    return [(bisect_left(s, x) + 0.5 * (bisect_right(s, x) - bisect_left(s, x))) / n for x in values]


def midrank_score(sorted_population: Sequence[float], x: float) -> float:
    n = len(sorted_population)
    if n == 0:
        raise ValueError("empty population")
    lo = bisect_left(sorted_population, x)
    hi = bisect_right(sorted_population, x)
    return (lo + 0.5 * (hi - lo)) / n


def combine_seq(
    canopy_q: float, co2_q: float, biodiversity_q: float, weights: ScoringWeights
) -> float:
    return (
        weights.seq_canopy * canopy_q
        + weights.seq_co2 * co2_q
        + weights.seq_biodiversity * biodiversity_q
    )


def combine_serenity(
    canopy_q: float, biodiversity_q: float, weights: ScoringWeights
) -> float:
    return weights.serenity_canopy * canopy_q + weights.serenity_biodiversity * biodiversity_q


def seq_score(
    attrs: SegmentAttributes,
    all_attrs: Sequence[SegmentAttributes],
    weights: ScoringWeights = ScoringWeights(),
) -> float:
    canopy_pop = sorted(a.canopy_area_m2 for a in all_attrs)
    co2_pop = sorted(a.co2_kg for a in all_attrs)
    bio_pop = sorted(float(a.species_count) for a in all_attrs)
    return combine_seq(
        midrank_score(canopy_pop, attrs.canopy_area_m2),
        midrank_score(co2_pop, attrs.co2_kg),
        midrank_score(bio_pop, float(attrs.species_count)),
        weights,
    )


def serenity_score(
    attrs: SegmentAttributes,
    all_attrs: Sequence[SegmentAttributes],
    weights: ScoringWeights = ScoringWeights(),
) -> float:
    canopy_pop = sorted(a.canopy_area_m2 for a in all_attrs)
    bio_pop = sorted(float(a.species_count) for a in all_attrs)
    return combine_serenity(
        midrank_score(canopy_pop, attrs.canopy_area_m2),
        midrank_score(bio_pop, float(attrs.species_count)),
        weights,
    )


def score_segments(
    all_attrs: Sequence[SegmentAttributes],
    weights: ScoringWeights = ScoringWeights(),
) -> dict[str, tuple[float, float]]:
    """Batch scoring: one sort per attribute, then (seq, serenity) per segment."""
    canopy_pop = sorted(a.canopy_area_m2 for a in all_attrs)
    co2_pop = sorted(a.co2_kg for a in all_attrs)
    bio_pop = sorted(float(a.species_count) for a in all_attrs)
    out: dict[str, tuple[float, float]] = {}
    for a in all_attrs:
        cq = midrank_score(canopy_pop, a.canopy_area_m2)
        oq = midrank_score(co2_pop, a.co2_kg)
        bq = midrank_score(bio_pop, float(a.species_count))
        out[a.segment_id] = (
            combine_seq(cq, oq, bq, weights),
            combine_serenity(cq, bq, weights),
        )
    return out
