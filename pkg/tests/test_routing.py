import math
import random

import networkx as nx
import pytest

from verdant import routing
from verdant.errors import NoLoopError, NoRouteError, SnapError
from verdant.routing import (
    DhcWeights,
    EmissionsModel,
    build_graph,
    dhc_route,
    emissions_factor,
    route_with_fallback,
    serenity_loop,
    serenity_route,
)

from conftest import grid_network, make_network


def scored(network, seq=0.5, serenity=0.5, overrides=None):
    scores = {seg.id: (seq, serenity) for seg in network.segments}
    if overrides:
        scores.update(overrides)
    return build_graph(network, scores)


class TestBuildGraph:
    def test_two_segments_three_nodes_four_edges(self):
        network = make_network([
            ("a", [[0, 0], [100, 0]], True, True, 40),
            ("b", [[100, 0], [100, 100]], True, True, 40),
        ])
        graph = scored(network)
        assert len(graph.nodes) == 3
        assert len(graph.edges) == 4

    def test_scores_attached_to_both_directions(self):
        network = make_network([("a", [[0, 0], [100, 0]], True, True, 40)])
        graph = scored(network, overrides={"a": (0.65, 0.4)})
        assert [e.seq for e in graph.edges] == [0.65, 0.65]

    def test_nearby_endpoints_merge_within_tolerance(self):
        network = make_network([
            ("a", [[0, 0], [100, 0]], True, True, 40),
            ("b", [[100.0, 0.005], [200, 0]], True, True, 40),
        ])
        graph = scored(network)
        assert len(graph.nodes) == 3  # the 5 mm apart endpoints collapse

    def test_distant_endpoints_stay_separate(self):
        network = make_network([
            ("a", [[0, 0], [100, 0]], True, True, 40),
            ("b", [[100.0, 0.5], [200, 0]], True, True, 40),
        ])
        graph = scored(network)
        assert len(graph.nodes) == 4

    def test_traffic_speed_overrides_free_speed(self):
        network = make_network([
            ("a", [[0, 0], [100, 0]], True, True, 60, 25.0),
        ])
        graph = scored(network)
        assert graph.edges[0].traffic_speed_kmh == 25.0
        assert graph.edges[0].free_speed_kmh == 60.0


class TestEmissions:
    def test_default_at_30(self):
        assert emissions_factor(EmissionsModel(), 30.0) == pytest.approx(144.5, rel=1e-12)

    def test_analytic_minimum(self):
        model = EmissionsModel()
        v_star = model.optimal_speed_kmh()
        assert v_star == pytest.approx(60000.0 ** (1.0 / 3.0), rel=1e-12)
        # numeric grid search agrees
        speeds = [1.0 + 0.01 * i for i in range(20000)]
        best = min(speeds, key=lambda v: emissions_factor(model, v))
        assert abs(best - v_star) < 0.1

    def test_constant_when_speed_terms_zero(self):
        model = EmissionsModel(k1=90.0, k2=0.0, k3=0.0)
        assert emissions_factor(model, 10.0) == emissions_factor(model, 110.0) == 90.0

    def test_nonpositive_speed_rejected(self):
        with pytest.raises(ValueError):
            emissions_factor(EmissionsModel(), 0.0)

    def test_convexity_sampled(self):
        model = EmissionsModel()
        speeds = [5.0 + i for i in range(100)]
        values = [emissions_factor(model, v) for v in speeds]
        for i in range(1, len(values) - 1):
            assert values[i] <= (values[i - 1] + values[i + 1]) / 2 + 1e-9


def oracle_edge_cost(length_m, speed, seq, weights, model):
    t = 3.6 * length_m / speed
    ef = model.k1 + model.k2 / speed + model.k3 * speed * speed
    lkm = length_m / 1000.0
    return weights.alpha * t + weights.beta * ef * lkm + weights.gamma * (1.0 - seq) * lkm


class TestDhcRoute:
    def corridor_graph(self):
        # fast low-seq corridor vs slow serene corridor between the same ends
        network = make_network([
            ("fast1", [[0, 0], [1000, 0]], True, True, 80),
            ("fast2", [[1000, 0], [2000, 0]], True, True, 80),
            ("green1", [[0, 0], [0, 300]], True, True, 30),
            ("green2", [[0, 300], [2000, 300]], True, True, 30),
            ("green3", [[2000, 300], [2000, 0]], True, True, 30),
        ])
        return scored(network, overrides={
            "fast1": (0.05, 0.1), "fast2": (0.05, 0.1),
            "green1": (0.9, 0.9), "green2": (0.9, 0.9), "green3": (0.9, 0.9),
        })

    def test_zero_gamma_beta_returns_fastest(self):
        graph = self.corridor_graph()
        result = dhc_route(graph, (0, 0), (2000, 0),
                           weights=DhcWeights(alpha=1.0, beta=0.0, gamma=0.0))
        assert result.eco.segment_ids == result.fastest.segment_ids
        assert result.eco.duration_s == pytest.approx(result.fastest.duration_s)

    def test_parallel_edges_high_seq_wins(self):
        network = make_network([
            ("low", [[0, 0], [100, 50], [200, 0]], True, True, 40),
            ("high", [[0, 0], [100, -50], [200, 0]], True, True, 40),
        ])
        graph = scored(network, overrides={"low": (0.1, 0.1), "high": (0.9, 0.9)})
        result = dhc_route(graph, (0, 0), (200, 0),
                           weights=DhcWeights(alpha=1.0, beta=0.01, gamma=500.0))
        assert result.eco.segment_ids == ["high"]

    def test_snap_beyond_radius_fails(self):
        graph = self.corridor_graph()
        with pytest.raises(SnapError):
            dhc_route(graph, (90_000, 0), (2000, 0))

    def test_unreachable_destination(self):
        network = make_network([
            ("a", [[0, 0], [100, 0]], True, True, 40),
            ("b", [[5000, 0], [5100, 0]], True, True, 40),
        ])
        graph = scored(network)
        with pytest.raises(NoRouteError):
            dhc_route(graph, (0, 0), (5100, 0), snap_radius_m=500.0)

    def test_matches_bruteforce_on_random_graphs(self):
        rng = random.Random(20250810)
        weights = DhcWeights(alpha=1.0, beta=0.01, gamma=500.0)
        model = EmissionsModel()
        for trial in range(40):
            n = rng.randint(4, 10)
            points = [(rng.uniform(0, 2000), rng.uniform(0, 2000)) for _ in range(n)]
            # spanning tree plus random chords keeps the graph connected
            pairs = {(i - 1 if i == 1 else rng.randint(0, i - 1), i) for i in range(1, n)}
            for _ in range(n):
                a, b = rng.randint(0, n - 1), rng.randint(0, n - 1)
                if a != b:
                    pairs.add((min(a, b), max(a, b)))
            specs, meta = [], {}
            for k, (a, b) in enumerate(sorted(pairs)):
                seq = rng.uniform(0.05, 0.95)
                speed = rng.uniform(20, 80)
                seg_id = f"e{k}"
                specs.append((seg_id, [points[a], points[b]], True, True, speed))
                meta[seg_id] = (a, b, speed, seq)
            network = make_network(specs)
            graph = build_graph(
                network, {sid: (meta[sid][3], 0.5) for sid in meta}
            )
            src, dst = 0, n - 1

            oracle = nx.Graph()
            for sid, (a, b, speed, seq) in meta.items():
                length = math.dist(points[a], points[b])
                oracle.add_edge(a, b, w=oracle_edge_cost(length, speed, seq, weights, model))
            best = min(
                sum(oracle[u][v]["w"] for u, v in zip(path, path[1:]))
                for path in nx.all_simple_paths(oracle, src, dst)
            )

            result = dhc_route(graph, points[src], points[dst], weights=weights)
            plan_cost = 0.0
            node_seq = [src]
            for sid in result.eco.segment_ids:
                a, b, speed, seq = meta[sid]
                length = math.dist(points[a], points[b])
                plan_cost += oracle_edge_cost(length, speed, seq, weights, model)
            assert plan_cost == pytest.approx(best, rel=1e-12), f"trial {trial}"

    def test_gamma_monotone_mean_seq(self, gamma_fixture_graph):
        graph = gamma_fixture_graph
        assert len(graph.nodes) == 20
        means = []
        for gamma in (0.0, 50.0, 200.0, 1000.0, 5000.0):
            result = dhc_route(
                graph, (0, 0), (2000, 0),
                weights=DhcWeights(alpha=1.0, beta=0.01, gamma=gamma),
            )
            means.append(result.eco.mean_seq)
        assert all(means[i] <= means[i + 1] + 1e-12 for i in range(len(means) - 1))
        assert means[-1] > means[0]


class TestSerenityRoute:
    def test_uniform_serenity_reduces_to_shortest(self):
        network, scores = grid_network(5, 5)
        graph = build_graph(network, scores)
        plan = serenity_route(graph, (0, 0), (400, 400))
        assert plan.distance_m == pytest.approx(800.0)
        assert plan.profile_used == "FOOT"
        assert plan.duration_s == pytest.approx(800.0 / (5.0 / 3.6))

    def test_serene_corridor_preferred(self):
        network = make_network([
            ("grey", [[0, 0], [100, 60], [200, 0]], True, False, 40),
            ("green", [[0, 0], [100, -60], [200, 0]], True, False, 40),
        ])
        graph = scored(network, overrides={"grey": (0.5, 0.0), "green": (0.5, 1.0)})
        plan = serenity_route(graph, (0, 0), (200, 0))
        assert plan.segment_ids == ["green"]
        assert plan.mean_serenity == pytest.approx(1.0)

    def test_detour_cap_and_serenity_floor_on_random_grids(self):
        rng = random.Random(99)
        for _ in range(10):
            network, _ = grid_network(6, 6)
            scores = {seg.id: (0.5, rng.random()) for seg in network.segments}
            graph = build_graph(network, scores)
            origin, dest = (0, 0), (500, 500)
            plan = serenity_route(graph, origin, dest, detour_cap=1.5)

            oracle = nx.Graph()
            for e in graph.edges:
                oracle.add_edge(e.u, e.v, length=e.length_m, serenity=e.serenity)
            src = min(range(len(graph.nodes)),
                      key=lambda i: math.dist(graph.nodes[i], origin))
            dst = min(range(len(graph.nodes)),
                      key=lambda i: math.dist(graph.nodes[i], dest))
            nodes = nx.shortest_path(oracle, src, dst, weight="length")
            short_len = sum(oracle[u][v]["length"] for u, v in zip(nodes, nodes[1:]))
            short_ser = sum(
                oracle[u][v]["serenity"] * oracle[u][v]["length"]
                for u, v in zip(nodes, nodes[1:])
            ) / short_len

            assert plan.distance_m <= 1.5 * short_len + 1e-9
            assert plan.mean_serenity >= short_ser - 1e-12


class TestFallback:
    def severed_network(self):
        # foot network covers only A-B; B-C is car-only, so pedestrians must
        # fall back to the drivable network to reach C
        return make_network([
            ("ab", [[0, 0], [1000, 0]], True, True, 50),
            ("bc", [[1000, 0], [2500, 0]], False, True, 50),
        ])

    def test_connected_foot_stays_foot(self):
        graph = scored(make_network([("ab", [[0, 0], [1000, 0]], True, True, 50)]))
        plan = route_with_fallback(graph, (0, 0), (1000, 0), "foot")
        assert plan.profile_used == "FOOT"

    def test_severed_foot_falls_back_to_car(self):
        graph = scored(self.severed_network())
        plan = route_with_fallback(graph, (0, 0), (2500, 0), "foot")
        assert plan.profile_used == "CAR_FALLBACK"
        assert plan.distance_m == pytest.approx(2500.0)
        # walking-speed duration: 2.5 km at 5 km/h is exactly 1800 s
        assert plan.duration_s == pytest.approx(1800.0, abs=1e-9)
        assert plan.emissions_g == 0.0

    def test_both_subgraphs_disconnected_noroute(self):
        network = make_network([
            ("a", [[0, 0], [100, 0]], True, True, 40),
            ("b", [[5000, 0], [5100, 0]], True, True, 40),
        ])
        graph = scored(network)
        with pytest.raises(NoRouteError):
            route_with_fallback(graph, (0, 0), (5100, 0), "foot")

    def test_car_profile_uses_dhc(self):
        graph = scored(self.severed_network())
        plan = route_with_fallback(graph, (0, 0), (2500, 0), "car")
        assert plan.profile_used == "CAR"
        assert plan.emissions_g > 0


class TestSerenityLoop:
    def test_uniform_grid_matches_target_within_cell(self, uniform_grid_graph):
        result = serenity_loop(uniform_grid_graph, (1400.0, 200.0), 30.0)
        assert result.target_distance_m == pytest.approx(2500.0)
        assert abs(result.plan.distance_m - 2500.0) <= 100.0
        assert result.plan.coords[0] == result.plan.coords[-1]
        assert result.plan.duration_s == pytest.approx(
            result.plan.distance_m / (5.0 / 3.6)
        )

    def test_single_candidate_selected_regardless_of_gap(self):
        network = make_network([("only", [[0, 0], [520, 0]], True, False, 40)])
        graph = scored(network)
        result = serenity_loop(graph, (0, 0), 30.0)
        assert result.plan.distance_m == pytest.approx(1040.0)

    def test_radius_expands_once(self):
        # nearest centroid sits beyond the initial radius but inside 1.5x
        network = make_network([("far", [[0, 0], [520, 0]], True, False, 40)])
        graph = scored(network)
        result = serenity_loop(graph, (0, 0), 6.0)  # d_t = 500 m, R = 250 m
        assert result.plan.distance_m == pytest.approx(1040.0)

    def test_no_loop_when_nothing_in_expanded_radius(self):
        network = make_network([("far", [[0, 0], [800, 0]], True, False, 40)])
        graph = scored(network)
        with pytest.raises(NoLoopError):
            serenity_loop(graph, (0, 0), 6.0)  # centroid at 400 > 1.5 * 250

    def test_waypoint_prefers_serene_segments(self):
        # two candidates at the same distance; only the serene one is in the
        # top 40 percent, so the loop must run through it
        network = make_network([
            ("west", [[0, 0], [-400, 0]], True, False, 40),
            ("east", [[0, 0], [400, 0]], True, False, 40),
        ])
        graph = scored(network, overrides={"west": (0.5, 0.1), "east": (0.5, 0.9)})
        result = serenity_loop(graph, (0, 0), 12.0)  # d_t = 1 km, R = 500
        assert result.plan.segment_ids == ["east", "east"]

    def test_loop_distance_is_sum_of_legs(self, uniform_grid_graph):
        result = serenity_loop(uniform_grid_graph, (1400.0, 200.0), 20.0)
        legs = len(result.plan.segment_ids)
        assert legs % 2 == 0
        assert result.plan.distance_m == pytest.approx(legs * 100.0)
