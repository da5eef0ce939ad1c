"""What-if planting simulation: hexagonal packing of an archetype inside a
polygon and the predicted LST depression over the affected raster.

The predictive model is deliberately transparent: a cell covered by any
planted canopy cools by the archetype's mean cooling efficacy, floored at the
10th percentile of the non-vegetated baseline (nothing cools below the coolest
observed non-living surface). Cooling never heats a cell that already sits
below the floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ecoservices import interpolated_percentile
from .errors import EmptyPolygonError
from .geometry import Point, point_in_polygon, polygon_area, polygon_bbox, polygon_is_simple
from .ingest import RasterScene


@dataclass(frozen=True)
class PlantingScenario:
    polygon: tuple[Point, ...]
    archetype_label: str
    canopy_diameter_m: float
    c_eff_arch: float

    def __post_init__(self):
        if not polygon_is_simple(self.polygon):
            raise ValueError("planting polygon must be simple (non-self-intersecting)")
        if polygon_area(self.polygon) <= 0:
            raise ValueError("planting polygon must have positive area")
        if not (self.canopy_diameter_m > 0):
            raise ValueError("archetype canopy diameter must be positive")


@dataclass
class SimulationOutcome:
    placements: list[Point]
    n_trees: int
    baseline_mean_lst: float
    predicted_mean_lst: float
    mean_depression: float
    delta_grid: np.ndarray  # scene-shaped, degC of predicted cooling, NaN where LST missing

    def to_dict(self, include_grid: bool = False) -> dict:
        d = {
            "placements": [[x, y] for x, y in self.placements],
            "n_trees": self.n_trees,
            "baseline_mean_lst": self.baseline_mean_lst,
            "predicted_mean_lst": self.predicted_mean_lst,
            "mean_depression": self.mean_depression,
        }
        if include_grid:
            d["delta_grid"] = [
                [None if math.isnan(v) else v for v in row]
                for row in self.delta_grid.tolist()
            ]
        return d


def hex_pack(polygon: Sequence[Point], spacing_m: float) -> list[Point]:
    """Centers on a triangular lattice clipped to the polygon.

    Row pitch is spacing * sqrt(3)/2 with alternate rows offset by half the
    spacing; the lattice is anchored at the bounding-box lower-left corner, so
    identical polygons always produce identical placements. A polygon too
    small to catch a lattice point yields an empty list.
    """
    if spacing_m <= 0:
        raise ValueError("spacing must be positive")
    minx, miny, maxx, maxy = polygon_bbox(polygon)
    dy = spacing_m * math.sqrt(3.0) / 2.0
    centers: list[Point] = []
    n_rows = math.floor((maxy - miny) / dy) + 1
    for i in range(n_rows):
        y = miny + i * dy
        offset = spacing_m / 2.0 if i % 2 else 0.0
        n_cols = math.floor((maxx - minx - offset) / spacing_m) + 1
        for j in range(n_cols):
            x = minx + offset + j * spacing_m
            if point_in_polygon(x, y, polygon):
                centers.append((x, y))
    return centers


def _nv_floor(scene: RasterScene, inside: np.ndarray) -> float:
    """P10 of the non-vegetated baseline: polygon-local when available, the
    whole scene otherwise, -inf when the scene has no usable NV pixel."""
    valid = ~np.isnan(scene.lst)
    local = scene.lst[inside & valid & scene.nv_mask]
    if local.size == 0:
        local = scene.lst[valid & scene.nv_mask]
    if local.size == 0:
        return -math.inf
    return interpolated_percentile(np.sort(local).tolist(), 10.0)


def simulate_planting(
    scenario: PlantingScenario,
    scene: RasterScene,
    spacing_m: Optional[float] = None,
) -> SimulationOutcome:
    """Place the archetype on a hex lattice (default spacing = its canopy
    diameter) and predict per-cell LST under binary canopy cover."""
    spacing = spacing_m if spacing_m is not None else scenario.canopy_diameter_m
    placements = hex_pack(scenario.polygon, spacing)

    valid = ~np.isnan(scene.lst)
    inside = np.zeros_like(valid)
    cs = scene.cell_size
    minx, miny, maxx, maxy = polygon_bbox(scenario.polygon)
    col_lo = max(0, math.floor((minx - scene.origin_x) / cs))
    col_hi = min(scene.cols - 1, math.ceil((maxx - scene.origin_x) / cs))
    rb_lo = max(0, math.floor((miny - scene.origin_y) / cs))
    rb_hi = min(scene.rows - 1, math.ceil((maxy - scene.origin_y) / cs))
    for rb in range(rb_lo, rb_hi + 1):
        row = scene.rows - 1 - rb
        cy = scene.origin_y + (rb + 0.5) * cs
        for col in range(col_lo, col_hi + 1):
            cx = scene.origin_x + (col + 0.5) * cs
            if point_in_polygon(cx, cy, scenario.polygon):
                inside[row, col] = True

    if not (inside & valid).any():
        raise EmptyPolygonError("polygon contains no valid LST cells")

    covered = np.zeros_like(valid)
    radius = scenario.canopy_diameter_m / 2.0
    r2 = radius * radius
    for px, py in placements:
        c_lo = max(0, math.floor((px - radius - scene.origin_x) / cs))
        c_hi = min(scene.cols - 1, math.ceil((px + radius - scene.origin_x) / cs))
        b_lo = max(0, math.floor((py - radius - scene.origin_y) / cs))
        b_hi = min(scene.rows - 1, math.ceil((py + radius - scene.origin_y) / cs))
        for rb in range(b_lo, b_hi + 1):
            row = scene.rows - 1 - rb
            cy = scene.origin_y + (rb + 0.5) * cs
            dy2 = (cy - py) ** 2
            for col in range(c_lo, c_hi + 1):
                if covered[row, col]:
                    continue
                cx = scene.origin_x + (col + 0.5) * cs
                if (cx - px) ** 2 + dy2 <= r2:
                    covered[row, col] = True

    floor = _nv_floor(scene, inside)
    predicted = scene.lst.copy()
    cool = covered & valid
    # clamp at the floor, but never lift a cell that already sits below it
    predicted[cool] = np.maximum(
        scene.lst[cool] - scenario.c_eff_arch,
        np.minimum(scene.lst[cool], floor),
    )

    delta = np.where(valid, scene.lst - predicted, np.nan)
    cells = inside & valid
    baseline_mean = float(scene.lst[cells].mean())
    predicted_mean = float(predicted[cells].mean())
    return SimulationOutcome(
        placements=placements,
        n_trees=len(placements),
        baseline_mean_lst=baseline_mean,
        predicted_mean_lst=predicted_mean,
        mean_depression=baseline_mean - predicted_mean,
        delta_grid=delta,
    )
