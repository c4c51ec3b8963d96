import json

import numpy as np
import pytest

from adsim.geo import Pose2D
from adsim.mapgraph import (MapError, OffRouteError, RoutePath, locate_on_route,
                            parse_vector_map, shortest_route, waypoint_window)

from support import (brute_force_route, make_map_text, random_graph,
                     straight_segment)


def build_graph(segments, lights=()):
    return parse_vector_map(make_map_text(segments, lights))


@pytest.fixture
def two_lane_graph():
    return build_graph([
        straight_segment("A", 0.0, 100.0, children=["B"]),
        straight_segment("B", 100.0, 250.0),
    ])


class TestParsing:
    def test_lengths_survive_geodetic_round_trip(self, two_lane_graph):
        assert two_lane_graph.segments["A"].length == pytest.approx(100.0, abs=1e-4)
        assert two_lane_graph.segments["B"].length == pytest.approx(150.0, abs=1e-4)

    def test_invalid_json_reports_byte_offset(self):
        with pytest.raises(MapError) as exc:
            parse_vector_map('{"type": "FeatureCollection", ')
        assert "byte offset" in str(exc.value)

    def test_missing_reference_point(self):
        doc = json.dumps({"type": "FeatureCollection", "features": []})
        with pytest.raises(MapError) as exc:
            parse_vector_map(doc)
        assert "reference_point" in str(exc.value)

    def test_dangling_child_reference_is_named(self):
        with pytest.raises(MapError) as exc:
            build_graph([straight_segment("A", 0.0, 50.0, children=["Z"])])
        msg = str(exc.value)
        assert "A->Z" in msg

    def test_duplicate_lane_id_rejected(self):
        with pytest.raises(MapError) as exc:
            build_graph([straight_segment("A", 0.0, 50.0),
                         straight_segment("A", 0.0, 60.0, y=5.0)])
        assert "duplicate" in str(exc.value)

    def test_unknown_feature_type_rejected(self):
        text = make_map_text([straight_segment("A", 0.0, 50.0)])
        doc = json.loads(text)
        doc["features"][0]["properties"]["type"] = "sidewalk"
        with pytest.raises(MapError):
            parse_vector_map(json.dumps(doc))

    def test_traffic_light_with_stop_point(self):
        g = build_graph(
            [straight_segment("A", 0.0, 100.0)],
            [{"id": "L1", "position": (60.0, 4.0), "governs": "A",
              "stop_point": (58.0, 0.0)}])
        light = g.lights["L1"]
        assert light.governs_segment_id == "A"
        assert light.stop_point.x == pytest.approx(58.0, abs=1e-4)
        assert g.lights_on_segment("A") == [light]

    def test_light_governing_unknown_segment_rejected(self):
        with pytest.raises(MapError):
            build_graph([straight_segment("A", 0.0, 100.0)],
                        [{"id": "L1", "position": (50.0, 0.0), "governs": "B"}])


class TestShortestRoute:
    def test_single_edge(self, two_lane_graph):
        route = shortest_route(two_lane_graph, "A", "B")
        assert route.segment_ids == ["A", "B"]
        assert route.total_length == pytest.approx(250.0, abs=1e-3)

    def test_start_equals_goal(self, two_lane_graph):
        route = shortest_route(two_lane_graph, "A", "A")
        assert route.segment_ids == ["A"]
        assert route.total_length == pytest.approx(100.0, abs=1e-3)

    def test_diamond_picks_shorter_branch(self):
        g = build_graph([
            straight_segment("A", 0.0, 50.0, children=["B", "C"]),
            straight_segment("B", 0.0, 120.0, y=10.0, children=["D"]),
            straight_segment("C", 0.0, 80.0, y=-10.0, children=["D"]),
            straight_segment("D", 0.0, 40.0, y=0.0),
        ])
        route = shortest_route(g, "A", "D")
        assert route.segment_ids == ["A", "C", "D"]
        assert route.total_length == pytest.approx(170.0, abs=1e-3)

    def test_disconnected_returns_none(self):
        g = build_graph([straight_segment("A", 0.0, 50.0),
                         straight_segment("B", 0.0, 50.0, y=20.0)])
        assert shortest_route(g, "A", "B") is None

    def test_unknown_ids_raise(self, two_lane_graph):
        with pytest.raises(MapError):
            shortest_route(two_lane_graph, "A", "nope")
        with pytest.raises(MapError):
            shortest_route(two_lane_graph, "nope", "B")

    def test_matches_brute_force_on_random_graphs(self):
        rng = np.random.default_rng(123)
        checked = 0
        for _ in range(40):
            segs, lengths, children = random_graph(rng, int(rng.integers(4, 11)))
            g = build_graph(segs)
            ids = list(lengths)
            start, goal = rng.choice(ids, 2, replace=False)
            got = shortest_route(g, start, goal)
            want = brute_force_route(lengths, children, start, goal)
            if want is None:
                assert got is None
            else:
                assert got is not None
                assert got.total_length == pytest.approx(want[1], abs=1e-3)
            checked += 1
        assert checked == 40


class TestRoutePath:
    def test_joint_points_deduplicated(self, two_lane_graph):
        path = RoutePath(two_lane_graph, shortest_route(two_lane_graph, "A", "B"))
        # every consecutive pair must be distinct, so diffs never collapse
        d = np.linalg.norm(np.diff(path.points, axis=0), axis=1)
        assert (d > 1e-9).all()
        assert path.length == pytest.approx(250.0, abs=1e-3)

    def test_left_of_travel_is_positive_deviation(self, two_lane_graph):
        path = RoutePath(two_lane_graph, shortest_route(two_lane_graph, "A", "B"))
        s, lateral, _ = path.project(np.array([40.0, 0.5]))
        assert s == pytest.approx(40.0, abs=1e-3)
        assert lateral == pytest.approx(0.5, abs=1e-3)
        _, lateral_r, _ = path.project(np.array([40.0, -0.5]))
        assert lateral_r == pytest.approx(-0.5, abs=1e-3)

    def test_equidistant_projection_prefers_lower_index(self):
        # sharp 90-degree corner: a point on the bisector is equidistant
        # from both edges
        g = build_graph([{
            "id": "A",
            "points": [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)],
        }])
        path = RoutePath(g, shortest_route(g, "A", "A"))
        _, _, edge = path.project(np.array([9.0, 1.0]))
        assert edge == 0

    def test_locate_on_route_rejects_far_pose(self, two_lane_graph):
        path = RoutePath(two_lane_graph, shortest_route(two_lane_graph, "A", "B"))
        with pytest.raises(OffRouteError):
            locate_on_route(path, Pose2D(40.0, 8.0), capture_radius=5.0)
        seg_id, s, lateral = locate_on_route(path, Pose2D(40.0, 2.0))
        assert seg_id == "A"
        assert s == pytest.approx(40.0, abs=1e-3)
        assert lateral == pytest.approx(2.0, abs=1e-3)

    def test_segment_attribution_after_joint(self, two_lane_graph):
        path = RoutePath(two_lane_graph, shortest_route(two_lane_graph, "A", "B"))
        seg_id, s, _ = locate_on_route(path, Pose2D(150.0, 0.0))
        assert seg_id == "B"
        assert s == pytest.approx(150.0, abs=1e-3)


class TestWaypointWindow:
    def test_hundred_meter_window_has_101_points(self, two_lane_graph):
        path = RoutePath(two_lane_graph, shortest_route(two_lane_graph, "A", "B"))
        win = waypoint_window(path, Pose2D(0.0, 0.0), horizon=100.0, spacing=1.0)
        assert len(win.positions) == 101
        assert win.arc_lengths[0] == 0.0
        assert win.arc_lengths[-1] == pytest.approx(100.0, abs=1e-6)
        steps = np.diff(win.arc_lengths)
        assert np.allclose(steps, 1.0, atol=1e-9)

    def test_window_truncates_at_route_end(self, two_lane_graph):
        path = RoutePath(two_lane_graph, shortest_route(two_lane_graph, "A", "B"))
        win = waypoint_window(path, Pose2D(230.0, 0.0), horizon=100.0)
        assert win.route_remaining == pytest.approx(20.0, abs=1e-3)
        assert win.arc_lengths[-1] == pytest.approx(win.route_remaining, abs=1e-6)
        end = path.point_at(path.length)
        assert np.allclose(win.positions[-1], end, atol=1e-6)

    def test_lights_reported_relative_to_window_start(self):
        g = build_graph(
            [straight_segment("A", 0.0, 200.0)],
            [{"id": "L1", "position": (150.0, 4.0), "governs": "A",
              "stop_point": (150.0, 0.0)}])
        path = RoutePath(g, shortest_route(g, "A", "A"))
        win = waypoint_window(path, Pose2D(100.0, 0.0), horizon=80.0)
        assert len(win.lights) == 1
        site, dist = win.lights[0]
        assert site.id == "L1"
        assert dist == pytest.approx(50.0, abs=1e-3)
        # a window that ends before the light must not include it
        win2 = waypoint_window(path, Pose2D(10.0, 0.0), horizon=80.0)
        assert win2.lights == []

    def test_speed_limits_interpolated_along_window(self, two_lane_graph):
        path = RoutePath(two_lane_graph, shortest_route(two_lane_graph, "A", "B"))
        win = waypoint_window(path, Pose2D(0.0, 0.0), horizon=50.0)
        assert np.allclose(win.speed_limits, 13.89, atol=1e-6)
