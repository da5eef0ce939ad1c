"""Planar geometry helpers shared by scoring, simulation and routing.

All coordinates are metric (projected CRS); nothing here knows about
latitude/longitude.
"""

from __future__ import annotations

import math
from typing import Sequence

Point = tuple[float, float]


def point_in_polygon(x: float, y: float, ring: Sequence[Point]) -> bool:
    """Even-odd ray-casting test against a closed ring.

    The classic crossing rule is used, which classifies points on the
    lower/left boundary as inside and on the upper/right boundary as outside.
    That half-open behaviour keeps lattice counts consistent with analytic
    densities and is applied uniformly across the package.
    """
    n = len(ring)
    if n >= 2 and ring[0] == ring[-1]:
        n -= 1
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = ring[i]
        xj, yj = ring[j]
        if (yi > y) != (yj > y):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def polygon_bbox(ring: Sequence[Point]) -> tuple[float, float, float, float]:
    xs = [p[0] for p in ring]
    ys = [p[1] for p in ring]
    return min(xs), min(ys), max(xs), max(ys)


def polygon_area(ring: Sequence[Point]) -> float:
    """Unsigned shoelace area; the ring may or may not repeat its first point."""
    pts = list(ring)
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    area = 0.0
    for i in range(len(pts)):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % len(pts)]
        area += x0 * y1 - x1 * y0
    return abs(area) / 2.0


def _segments_properly_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if v > 1e-12:
            return 1
        if v < -1e-12:
            return -1
        return 0

    o1 = orient(p1, p2, q1)
    o2 = orient(p1, p2, q2)
    o3 = orient(q1, q2, p1)
    o4 = orient(q1, q2, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def polygon_is_simple(ring: Sequence[Point]) -> bool:
    """True when no two non-adjacent edges properly cross. O(n^2), fine for
    hand-drawn planting polygons."""
    pts = list(ring)
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    n = len(pts)
    if n < 3:
        return False
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b1, b2 = pts[j], pts[(j + 1) % n]
            if _segments_properly_intersect(a1, a2, b1, b2):
                return False
    return True


def point_segment_distance(px: float, py: float, a: Point, b: Point) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / seg2
    t = max(0.0, min(1.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def point_polyline_distance(px: float, py: float, coords: Sequence[Point]) -> float:
    return min(
        point_segment_distance(px, py, coords[i], coords[i + 1])
        for i in range(len(coords) - 1)
    )


def polyline_length(coords: Sequence[Point]) -> float:
    return sum(
        math.hypot(coords[i + 1][0] - coords[i][0], coords[i + 1][1] - coords[i][1])
        for i in range(len(coords) - 1)
    )


def polyline_midpoint(coords: Sequence[Point]) -> Point:
    """Point at half the arc length along the polyline."""
    total = polyline_length(coords)
    if total == 0.0:
        return coords[0]
    target = total / 2.0
    walked = 0.0
    for i in range(len(coords) - 1):
        (x0, y0), (x1, y1) = coords[i], coords[i + 1]
        step = math.hypot(x1 - x0, y1 - y0)
        if walked + step >= target:
            f = (target - walked) / step
            return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
        walked += step
    return coords[-1]
