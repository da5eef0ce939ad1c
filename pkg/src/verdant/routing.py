"""Eco-routing over the scored street network.

Vehicular routes minimize a holistic cost of travel time, speed-dependent
emissions and an environmental term that charges each kilometre by how far
its segment falls short of a perfect quality score; rewarding quality through
a (1 - seq) length charge keeps every edge cost positive, so plain
label-setting search stays exact. Pedestrian routes maximize serenity under a
detour cap, falling back to the drivable network with walking-speed durations
when the foot network is disconnected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Callable, Mapping, Optional, Sequence

from .errors import NoLoopError, NoRouteError, SnapError
from .geometry import Point, polyline_length, polyline_midpoint
from .ingest import RoadNetwork

from .ecoservices import interpolated_percentile

DEFAULT_WALKING_SPEED_KMH = 5.0
DEFAULT_SNAP_RADIUS_M = 500.0
DEFAULT_DETOUR_CAP = 1.5
NODE_MERGE_TOLERANCE_M = 0.01
LOOP_TOP_FRACTION = 0.4

PROFILE_FOOT = "FOOT"
PROFILE_CAR = "CAR"
PROFILE_CAR_FALLBACK = "CAR_FALLBACK"


@dataclass(frozen=True)
class EmissionsModel:
    """E_f(v) = k1 + k2/v + k3*v^2 in g/km; defaults are placeholders with the
    right orders of magnitude, exposed for calibration."""

    k1: float = 120.0
    k2: float = 600.0
    k3: float = 0.005

    def __post_init__(self):
        if self.k1 < 0 or self.k2 < 0 or self.k3 < 0:
            raise ValueError("emissions constants must be non-negative")

    def optimal_speed_kmh(self) -> float:
        """Analytic minimum of the U-shaped curve."""
        if self.k3 == 0:
            return math.inf
        return (self.k2 / (2.0 * self.k3)) ** (1.0 / 3.0)


def emissions_factor(model: EmissionsModel, v_kmh: float) -> float:
    if v_kmh <= 0:
        raise ValueError("speed must be positive")
    return model.k1 + model.k2 / v_kmh + model.k3 * v_kmh * v_kmh


@dataclass(frozen=True)
class DhcWeights:
    """alpha: cost per second of travel; beta: cost per gram CO2; gamma:
    environmental charge per km of quality shortfall. Defaults put the three
    terms in the same order of magnitude on a 1 km urban edge."""

    alpha: float = 1.0
    beta: float = 0.01
    gamma: float = 500.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("DHC weights must be non-negative")
        if self.alpha + self.gamma <= 0:
            raise ValueError("alpha + gamma must be positive for positive edge costs")


@dataclass(frozen=True)
class GraphEdge:
    u: int
    v: int
    segment_id: str
    length_m: float
    free_speed_kmh: float
    traffic_speed_kmh: float
    foot_allowed: bool
    car_allowed: bool
    seq: float
    serenity: float
    coords: tuple[Point, ...]

    @property
    def speed_kmh(self) -> float:
        return self.traffic_speed_kmh

    def travel_time_s(self) -> float:
        return 3.6 * self.length_m / self.traffic_speed_kmh


@dataclass
class RoadGraph:
    nodes: list[Point]
    edges: list[GraphEdge]
    out_edges: list[list[int]] = field(default_factory=list)

    def car_nodes(self) -> set[int]:
        return {n for e in self.edges if e.car_allowed for n in (e.u, e.v)}

    def foot_nodes(self) -> set[int]:
        return {n for e in self.edges if e.foot_allowed for n in (e.u, e.v)}


def build_graph(
    roads: RoadNetwork, scores: Mapping[str, tuple[float, float]]
) -> RoadGraph:
    """Node the segments at shared endpoints (coordinates within 0.01 m merge)
    and emit two directed edges per segment carrying its scores."""
    nodes: list[Point] = []
    buckets: dict[tuple[int, int], list[int]] = {}
    tol = NODE_MERGE_TOLERANCE_M

    def node_for(p: Point) -> int:
        bx, by = math.floor(p[0] / tol), math.floor(p[1] / tol)
        for nx in range(bx - 1, bx + 2):
            for ny in range(by - 1, by + 2):
                for idx in buckets.get((nx, ny), ()):
                    q = nodes[idx]
                    if math.hypot(p[0] - q[0], p[1] - q[1]) <= tol:
                        return idx
        nodes.append(p)
        idx = len(nodes) - 1
        buckets.setdefault((bx, by), []).append(idx)
        return idx

    edges: list[GraphEdge] = []
    for seg in roads.segments:
        if seg.id not in scores:
            raise KeyError(f"segment {seg.id} has no score; score the network first")
        seq, serenity = scores[seg.id]
        u = node_for(seg.coords[0])
        v = node_for(seg.coords[-1])
        length = polyline_length(seg.coords)
        speed = (
            seg.traffic_speed_kmh
            if seg.traffic_speed_kmh is not None
            else seg.speed_limit_kmh
        )
        common = dict(
            segment_id=seg.id,
            length_m=length,
            free_speed_kmh=seg.speed_limit_kmh,
            traffic_speed_kmh=speed,
            foot_allowed=seg.foot_allowed,
            car_allowed=seg.car_allowed,
            seq=seq,
            serenity=serenity,
        )
        edges.append(GraphEdge(u=u, v=v, coords=seg.coords, **common))
        edges.append(GraphEdge(u=v, v=u, coords=tuple(reversed(seg.coords)), **common))

    out: list[list[int]] = [[] for _ in nodes]
    for i, e in enumerate(edges):
        out[e.u].append(i)
    return RoadGraph(nodes=nodes, edges=edges, out_edges=out)


@dataclass
class RoutePlan:
    segment_ids: list[str]
    coords: list[Point]
    distance_m: float
    duration_s: float
    emissions_g: float
    mean_seq: float
    mean_serenity: float
    profile_used: str

    def to_dict(self) -> dict:
        return {
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [[x, y] for x, y in self.coords],
            },
            "properties": {
                "segment_ids": self.segment_ids,
                "distance_m": self.distance_m,
                "duration_s": self.duration_s,
                "emissions_g": self.emissions_g,
                "mean_seq": self.mean_seq,
                "mean_serenity": self.mean_serenity,
                "profile_used": self.profile_used,
            },
        }


@dataclass
class DhcResult:
    eco: RoutePlan
    fastest: RoutePlan

    def to_dict(self) -> dict:
        return {"eco": self.eco.to_dict(), "conventional": self.fastest.to_dict()}


@dataclass
class LoopResult:
    plan: RoutePlan
    waypoint: Point
    target_distance_m: float

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "waypoint": [self.waypoint[0], self.waypoint[1]],
            "target_distance_m": self.target_distance_m,
        }


def _snap(
    graph: RoadGraph,
    x: float,
    y: float,
    allowed_nodes: set[int],
    radius_m: float = DEFAULT_SNAP_RADIUS_M,
) -> int:
    best, best_d = -1, math.inf
    for idx in allowed_nodes:
        nx, ny = graph.nodes[idx]
        d = math.hypot(nx - x, ny - y)
        if d < best_d or (d == best_d and idx < best):
            best, best_d = idx, d
    if best < 0 or best_d > radius_m:
        raise SnapError(
            f"no routable node within {radius_m} m of ({x}, {y})", x=x, y=y
        )
    return best


def _dijkstra(
    graph: RoadGraph,
    src: int,
    dst: int,
    cost_fn: Callable[[GraphEdge], float],
    allow_fn: Callable[[GraphEdge], bool],
    cap_length_m: Optional[float] = None,
) -> Optional[list[int]]:
    """Label-setting search returning the edge-index path, or None when dst is
    unreachable. With cap_length_m, relaxations whose cumulative geometric
    length would exceed the cap are rejected."""
    n = len(graph.nodes)
    dist = [math.inf] * n
    length_at = [0.0] * n
    prev_edge: list[int] = [-1] * n
    done = [False] * n
    dist[src] = 0.0
    heap: list[tuple[float, int]] = [(0.0, src)]
    while heap:
        d, u = heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == dst:
            break
        for ei in graph.out_edges[u]:
            e = graph.edges[ei]
            if not allow_fn(e):
                continue
            if cap_length_m is not None and length_at[u] + e.length_m > cap_length_m:
                continue
            nd = d + cost_fn(e)
            if nd < dist[e.v]:
                dist[e.v] = nd
                length_at[e.v] = length_at[u] + e.length_m
                prev_edge[e.v] = ei
                heappush(heap, (nd, e.v))
    if not done[dst] and math.isinf(dist[dst]):
        return None
    path: list[int] = []
    node = dst
    while node != src:
        ei = prev_edge[node]
        if ei < 0:
            return None
        path.append(ei)
        node = graph.edges[ei].u
    path.reverse()
    return path


def _plan_from_edges(
    graph: RoadGraph,
    edge_path: Sequence[int],
    profile: str,
    start_node: int,
    emissions: Optional[EmissionsModel] = None,
    walking_speed_kmh: float = DEFAULT_WALKING_SPEED_KMH,
) -> RoutePlan:
    edges = [graph.edges[i] for i in edge_path]
    distance = sum(e.length_m for e in edges)
    if profile == PROFILE_CAR:
        duration = sum(e.travel_time_s() for e in edges)
        model = emissions if emissions is not None else EmissionsModel()
        emissions_g = sum(
            emissions_factor(model, e.traffic_speed_kmh) * e.length_m / 1000.0
            for e in edges
        )
    else:
        duration = distance / (walking_speed_kmh / 3.6) if distance else 0.0
        emissions_g = 0.0
    if distance > 0:
        mean_seq = sum(e.seq * e.length_m for e in edges) / distance
        mean_serenity = sum(e.serenity * e.length_m for e in edges) / distance
    else:
        mean_seq = mean_serenity = 0.0
    coords: list[Point] = [graph.nodes[start_node]]
    for e in edges:
        coords.extend(e.coords[1:])
    return RoutePlan(
        segment_ids=[e.segment_id for e in edges],
        coords=coords,
        distance_m=distance,
        duration_s=duration,
        emissions_g=emissions_g,
        mean_seq=mean_seq,
        mean_serenity=mean_serenity,
        profile_used=profile,
    )


def dhc_edge_cost(e: GraphEdge, weights: DhcWeights, model: EmissionsModel) -> float:
    length_km = e.length_m / 1000.0
    return (
        weights.alpha * e.travel_time_s()
        + weights.beta * emissions_factor(model, e.traffic_speed_kmh) * length_km
        + weights.gamma * (1.0 - e.seq) * length_km
    )


def dhc_route(
    graph: RoadGraph,
    origin: Point,
    dest: Point,
    weights: DhcWeights = DhcWeights(),
    emissions: EmissionsModel = EmissionsModel(),
    snap_radius_m: float = DEFAULT_SNAP_RADIUS_M,
) -> DhcResult:
    """Optimal holistic-cost vehicular route, plus the pure fastest-time route
    for side-by-side comparison."""
    car_nodes = graph.car_nodes()
    src = _snap(graph, origin[0], origin[1], car_nodes, snap_radius_m)
    dst = _snap(graph, dest[0], dest[1], car_nodes, snap_radius_m)

    def allow(e: GraphEdge) -> bool:
        return e.car_allowed

    eco_path = _dijkstra(graph, src, dst, lambda e: dhc_edge_cost(e, weights, emissions), allow)
    if eco_path is None:
        raise NoRouteError("destination unreachable on the drivable network")
    fast_path = _dijkstra(graph, src, dst, lambda e: e.travel_time_s(), allow)
    assert fast_path is not None  # same subgraph as eco_path
    return DhcResult(
        eco=_plan_from_edges(graph, eco_path, PROFILE_CAR, src, emissions=emissions),
        fastest=_plan_from_edges(graph, fast_path, PROFILE_CAR, src, emissions=emissions),
    )


def _serenity_objective(graph: RoadGraph, edge_path: Sequence[int]) -> float:
    return sum(
        graph.edges[i].length_m * (1.0 - graph.edges[i].serenity) for i in edge_path
    )


def _serenity_path(
    graph: RoadGraph,
    src: int,
    dst: int,
    allow_fn: Callable[[GraphEdge], bool],
    detour_cap: float,
) -> Optional[list[int]]:
    """Serenity-optimal path subject to the detour cap.

    The cap prunes relaxations, which can in odd topologies block the best
    capped route, so the plain shortest path acts as a floor: whichever of the
    two has the lower serenity objective wins. The result is therefore never
    worse than the shortest path and never longer than the cap."""
    shortest = _dijkstra(graph, src, dst, lambda e: e.length_m, allow_fn)
    if shortest is None:
        return None
    shortest_len = sum(graph.edges[i].length_m for i in shortest)
    capped = _dijkstra(
        graph,
        src,
        dst,
        lambda e: e.length_m * (1.0 - e.serenity),
        allow_fn,
        cap_length_m=detour_cap * shortest_len,
    )
    if capped is not None and _serenity_objective(graph, capped) <= _serenity_objective(
        graph, shortest
    ):
        return capped
    return shortest


def serenity_route(
    graph: RoadGraph,
    origin: Point,
    dest: Point,
    walking_speed_kmh: float = DEFAULT_WALKING_SPEED_KMH,
    detour_cap: float = DEFAULT_DETOUR_CAP,
    snap_radius_m: float = DEFAULT_SNAP_RADIUS_M,
) -> RoutePlan:
    """Pedestrian route minimizing length-weighted serenity shortfall on the
    foot subgraph, with walking-speed durations."""
    foot_nodes = graph.foot_nodes()
    if not foot_nodes:
        raise SnapError("network has no foot-allowed segments")
    src = _snap(graph, origin[0], origin[1], foot_nodes, snap_radius_m)
    dst = _snap(graph, dest[0], dest[1], foot_nodes, snap_radius_m)
    path = _serenity_path(graph, src, dst, lambda e: e.foot_allowed, detour_cap)
    if path is None:
        raise NoRouteError("destination unreachable on the pedestrian network")
    return _plan_from_edges(
        graph, path, PROFILE_FOOT, src, walking_speed_kmh=walking_speed_kmh
    )


def route_with_fallback(
    graph: RoadGraph,
    origin: Point,
    dest: Point,
    profile: str,
    weights: DhcWeights = DhcWeights(),
    emissions: EmissionsModel = EmissionsModel(),
    walking_speed_kmh: float = DEFAULT_WALKING_SPEED_KMH,
    detour_cap: float = DEFAULT_DETOUR_CAP,
    snap_radius_m: float = DEFAULT_SNAP_RADIUS_M,
) -> RoutePlan:
    """Profile-aware routing. When the foot profile fails for connectivity
    reasons, re-route on the drivable network with the serenity objective and
    report walking-speed durations, marking the plan CAR_FALLBACK so the
    switch is never silent."""
    if profile.upper() in (PROFILE_CAR, "DRIVING"):
        return dhc_route(graph, origin, dest, weights, emissions, snap_radius_m).eco
    try:
        return serenity_route(
            graph, origin, dest, walking_speed_kmh, detour_cap, snap_radius_m
        )
    except (SnapError, NoRouteError):
        car_nodes = graph.car_nodes()
        if not car_nodes:
            raise NoRouteError("no foot or car path between the endpoints")
        try:
            src = _snap(graph, origin[0], origin[1], car_nodes, snap_radius_m)
            dst = _snap(graph, dest[0], dest[1], car_nodes, snap_radius_m)
        except SnapError:
            raise NoRouteError("no foot or car path between the endpoints")
        path = _serenity_path(graph, src, dst, lambda e: e.car_allowed, detour_cap)
        if path is None:
            raise NoRouteError("no foot or car path between the endpoints")
        return _plan_from_edges(
            graph, path, PROFILE_CAR_FALLBACK, src, walking_speed_kmh=walking_speed_kmh
        )


def _shortest_with_fallback(
    graph: RoadGraph,
    origin: Point,
    dest: Point,
    walking_speed_kmh: float = DEFAULT_WALKING_SPEED_KMH,
    snap_radius_m: float = DEFAULT_SNAP_RADIUS_M,
) -> RoutePlan:
    """Plain shortest pedestrian path (the conventional comparison route),
    with the same car fallback as the serenity objective."""
    for allow, profile in (
        (lambda e: e.foot_allowed, PROFILE_FOOT),
        (lambda e: e.car_allowed, PROFILE_CAR_FALLBACK),
    ):
        nodes = {n for e in graph.edges if allow(e) for n in (e.u, e.v)}
        if not nodes:
            continue
        try:
            src = _snap(graph, origin[0], origin[1], nodes, snap_radius_m)
            dst = _snap(graph, dest[0], dest[1], nodes, snap_radius_m)
        except SnapError:
            continue
        path = _dijkstra(graph, src, dst, lambda e: e.length_m, allow)
        if path is not None:
            return _plan_from_edges(
                graph, path, profile, src, walking_speed_kmh=walking_speed_kmh
            )
    raise NoRouteError("no foot or car path between the endpoints")


def route_pair(
    graph: RoadGraph,
    origin: Point,
    dest: Point,
    mode: str,
    weights: DhcWeights = DhcWeights(),
    emissions: EmissionsModel = EmissionsModel(),
    walking_speed_kmh: float = DEFAULT_WALKING_SPEED_KMH,
    detour_cap: float = DEFAULT_DETOUR_CAP,
    snap_radius_m: float = DEFAULT_SNAP_RADIUS_M,
) -> DhcResult:
    """Eco route plus its conventional counterpart for either profile: holistic
    cost vs fastest time for cars, serene vs shortest for pedestrians."""
    if mode.lower() in ("car", "driving"):
        return dhc_route(graph, origin, dest, weights, emissions, snap_radius_m)
    eco = route_with_fallback(
        graph,
        origin,
        dest,
        "foot",
        weights,
        emissions,
        walking_speed_kmh,
        detour_cap,
        snap_radius_m,
    )
    conventional = _shortest_with_fallback(
        graph, origin, dest, walking_speed_kmh, snap_radius_m
    )
    return DhcResult(eco=eco, fastest=conventional)


def _concat_plans(
    out_leg: RoutePlan, back_leg: RoutePlan, walking_speed_kmh: float
) -> RoutePlan:
    distance = out_leg.distance_m + back_leg.distance_m
    profile = (
        PROFILE_CAR_FALLBACK
        if PROFILE_CAR_FALLBACK in (out_leg.profile_used, back_leg.profile_used)
        else PROFILE_FOOT
    )
    if distance > 0:
        mean_seq = (
            out_leg.mean_seq * out_leg.distance_m + back_leg.mean_seq * back_leg.distance_m
        ) / distance
        mean_serenity = (
            out_leg.mean_serenity * out_leg.distance_m
            + back_leg.mean_serenity * back_leg.distance_m
        ) / distance
    else:
        mean_seq = mean_serenity = 0.0
    return RoutePlan(
        segment_ids=out_leg.segment_ids + back_leg.segment_ids,
        coords=out_leg.coords + back_leg.coords[1:],
        distance_m=distance,
        duration_s=distance / (walking_speed_kmh / 3.6) if distance else 0.0,
        emissions_g=0.0,
        mean_seq=mean_seq,
        mean_serenity=mean_serenity,
        profile_used=profile,
    )


def serenity_loop(
    graph: RoadGraph,
    start: Point,
    target_minutes: float,
    walking_speed_kmh: float = DEFAULT_WALKING_SPEED_KMH,
    snap_radius_m: float = DEFAULT_SNAP_RADIUS_M,
) -> LoopResult:
    """Out-and-back recreational loop.

    Candidate waypoints are the centroids of the most serene road segments
    (top 40 percent within the search radius, radius = half the target
    distance); the waypoint whose round trip best matches the target distance
    wins, ties broken by higher round-trip serenity. The search radius expands
    once by 1.5x when the first pass yields nothing.
    """
    if target_minutes <= 0:
        raise ValueError("target duration must be positive")
    foot_nodes = graph.foot_nodes()
    snap_pool = foot_nodes if foot_nodes else set(range(len(graph.nodes)))
    start_node = _snap(graph, start[0], start[1], snap_pool, snap_radius_m)
    sx, sy = graph.nodes[start_node]

    target_m = walking_speed_kmh * 1000.0 * target_minutes / 60.0

    # one forward edge per segment
    segments: dict[str, GraphEdge] = {}
    for e in graph.edges:
        segments.setdefault(e.segment_id, e)

    def candidates_within(radius: float) -> list[int]:
        in_radius: list[tuple[GraphEdge, Point]] = []
        for e in segments.values():
            mid = polyline_midpoint(e.coords)
            if math.hypot(mid[0] - sx, mid[1] - sy) <= radius:
                in_radius.append((e, mid))
        if not in_radius:
            return []
        serenities = sorted(e.serenity for e, _ in in_radius)
        threshold = interpolated_percentile(serenities, 100.0 * (1.0 - LOOP_TOP_FRACTION))
        nodes: list[int] = []
        seen: set[int] = set()
        # a straight segment's midpoint ties between its endpoints, so the
        # start node is excluded from the snap pool rather than tie-broken
        pool = [i for i in range(len(graph.nodes)) if i != start_node]
        for e, mid in in_radius:
            if e.serenity < threshold:
                continue
            w = min(
                pool,
                key=lambda i: (
                    math.hypot(graph.nodes[i][0] - mid[0], graph.nodes[i][1] - mid[1]),
                    i,
                ),
            )
            if w not in seen:
                seen.add(w)
                nodes.append(w)
        return nodes

    best: Optional[tuple[float, float, int, RoutePlan]] = None
    for radius in (target_m / 2.0, target_m / 2.0 * 1.5):
        for w in candidates_within(radius):
            wx, wy = graph.nodes[w]
            try:
                out_leg = route_with_fallback(
                    graph, (sx, sy), (wx, wy), "foot",
                    walking_speed_kmh=walking_speed_kmh, snap_radius_m=snap_radius_m,
                )
                back_leg = route_with_fallback(
                    graph, (wx, wy), (sx, sy), "foot",
                    walking_speed_kmh=walking_speed_kmh, snap_radius_m=snap_radius_m,
                )
            except NoRouteError:
                continue
            loop = _concat_plans(out_leg, back_leg, walking_speed_kmh)
            key = (abs(loop.distance_m - target_m), -loop.mean_serenity, w)
            if best is None or key < (best[0], best[1], best[2]):
                best = (key[0], key[1], w, loop)
        if best is not None:
            break
    if best is None:
        raise NoLoopError(
            f"no reachable serene waypoint within {target_m / 2.0 * 1.5:.0f} m of the start"
        )
    _, _, w, loop = best
    return LoopResult(plan=loop, waypoint=graph.nodes[w], target_distance_m=target_m)
