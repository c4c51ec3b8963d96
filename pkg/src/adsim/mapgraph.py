"""HD-map vector layer parsing, lane graph routing and waypoint queries.

Maps are GeoJSON FeatureCollections. Lane segments are LineString features
with ``id``, ``parents``, ``children`` and ``speed_limit`` properties;
traffic lights are Point features with a ``governs`` property naming the
lane segment they control. The ENU reference point lives in the top-level
``properties.reference_point`` as ``[lon, lat, alt]``. The full schema is
documented in docs/map_format.md.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geo import GeodeticPoint, Pose2D, geodetic_to_enu


class MapError(Exception):
    """Raised for malformed or inconsistent map documents."""


class OffRouteError(Exception):
    """Pose is beyond the capture radius of the route."""


@dataclass
class LaneSegment:
    id: str
    centerline: np.ndarray          # (N, 2) ENU meters
    speed_limits: np.ndarray        # (N,) m/s, per centerline point
    parent_ids: list[str] = field(default_factory=list)
    child_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.centerline = np.asarray(self.centerline, dtype=float)
        if self.centerline.ndim != 2 or self.centerline.shape[0] < 2:
            raise MapError(f"segment {self.id!r}: centerline needs >= 2 points")
        self.speed_limits = np.asarray(self.speed_limits, dtype=float)
        if self.speed_limits.shape[0] != self.centerline.shape[0]:
            raise MapError(f"segment {self.id!r}: speed limit count mismatch")
        deltas = np.diff(self.centerline, axis=0)
        self.cum_s = np.concatenate([[0.0], np.cumsum(np.hypot(deltas[:, 0], deltas[:, 1]))])

    @property
    def length(self) -> float:
        return float(self.cum_s[-1])


@dataclass
class TrafficLightSite:
    id: str
    stop_point: Pose2D
    governs_segment_id: str
    approximate_light_position: Pose2D


@dataclass
class Route:
    segment_ids: list[str]
    total_length: float


class LaneGraph:
    def __init__(self, segments: dict[str, LaneSegment],
                 lights: dict[str, TrafficLightSite],
                 reference: GeodeticPoint):
        self.segments = segments
        self.lights = lights
        self.reference = reference
        self._validate_links()

    def _validate_links(self) -> None:
        dangling = []
        for seg in self.segments.values():
            for ref in list(seg.parent_ids) + list(seg.child_ids):
                if ref not in self.segments:
                    dangling.append(f"{seg.id}->{ref}")
        for light in self.lights.values():
            if light.governs_segment_id not in self.segments:
                dangling.append(f"{light.id}->{light.governs_segment_id}")
        if dangling:
            raise MapError("dangling references: " + ", ".join(sorted(dangling)))

    def lights_on_segment(self, segment_id: str) -> list[TrafficLightSite]:
        return [l for l in self.lights.values() if l.governs_segment_id == segment_id]


def _to_mps(value, n: int) -> np.ndarray:
    if isinstance(value, (int, float)):
        return np.full(n, float(value))
    arr = np.asarray(value, dtype=float)
    if arr.shape[0] != n:
        raise MapError("per-point speed_limit length does not match geometry")
    return arr


def parse_vector_map(document: str) -> LaneGraph:
    """Parse GeoJSON vector layers into a lane graph with ENU geometry."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MapError(f"invalid JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if doc.get("type") != "FeatureCollection":
        raise MapError("document is not a GeoJSON FeatureCollection")
    props = doc.get("properties") or {}
    ref = props.get("reference_point")
    if ref is None:
        raise MapError("missing top-level properties.reference_point [lon, lat, alt]")
    reference = GeodeticPoint(latitude=ref[1], longitude=ref[0],
                              altitude=ref[2] if len(ref) > 2 else 0.0)

    def to_enu(lonlat) -> tuple[float, float]:
        p = GeodeticPoint(latitude=lonlat[1], longitude=lonlat[0],
                          altitude=lonlat[2] if len(lonlat) > 2 else reference.altitude)
        x, y, _ = geodetic_to_enu(p, reference)
        return x, y

    segments: dict[str, LaneSegment] = {}
    lights: dict[str, TrafficLightSite] = {}
    for i, feature in enumerate(doc.get("features", [])):
        fprops = feature.get("properties") or {}
        ftype = fprops.get("type")
        geom = feature.get("geometry") or {}
        fid = fprops.get("id")
        if fid is None:
            raise MapError(f"feature #{i} has no 'id' property")
        fid = str(fid)
        if ftype == "lane":
            if geom.get("type") != "LineString":
                raise MapError(f"lane {fid!r}: geometry must be LineString")
            coords = geom["coordinates"]
            pts = np.array([to_enu(c) for c in coords])
            limits = _to_mps(fprops.get("speed_limit", 13.89), len(coords))
            if fid in segments:
                raise MapError(f"duplicate lane id {fid!r}")
            segments[fid] = LaneSegment(
                id=fid,
                centerline=pts,
                speed_limits=limits,
                parent_ids=[str(p) for p in fprops.get("parents", [])],
                child_ids=[str(c) for c in fprops.get("children", [])],
            )
        elif ftype == "traffic_light":
            if geom.get("type") != "Point":
                raise MapError(f"traffic_light {fid!r}: geometry must be Point")
            lx, ly = to_enu(geom["coordinates"])
            stop = fprops.get("stop_point")
            if stop is not None:
                sx, sy = to_enu(stop)
            else:
                sx, sy = lx, ly
            lights[fid] = TrafficLightSite(
                id=fid,
                stop_point=Pose2D(sx, sy),
                governs_segment_id=str(fprops.get("governs", "")),
                approximate_light_position=Pose2D(lx, ly),
            )
        else:
            raise MapError(f"feature {fid!r}: unknown type {ftype!r}")
    return LaneGraph(segments, lights, reference)


def shortest_route(graph: LaneGraph, start_id: str, goal_id: str) -> Route | None:
    """Minimum-total-centerline-length route, or None when unreachable.

    Path cost counts the length of every segment on the route, including
    start and goal.
    """
    if start_id not in graph.segments:
        raise MapError(f"unknown segment {start_id!r}")
    if goal_id not in graph.segments:
        raise MapError(f"unknown segment {goal_id!r}")
    start_len = graph.segments[start_id].length
    best: dict[str, float] = {start_id: start_len}
    prev: dict[str, str] = {}
    heap: list[tuple[float, str]] = [(start_len, start_id)]
    while heap:
        dist, sid = heapq.heappop(heap)
        if dist > best.get(sid, math.inf):
            continue
        if sid == goal_id:
            ids = [sid]
            while ids[-1] in prev:
                ids.append(prev[ids[-1]])
            ids.reverse()
            return Route(segment_ids=ids, total_length=dist)
        for child in graph.segments[sid].child_ids:
            nd = dist + graph.segments[child].length
            if nd < best.get(child, math.inf):
                best[child] = nd
                prev[child] = sid
                heapq.heappush(heap, (nd, child))
    return None


class RoutePath:
    """Concatenated route centerline with arc-length indexing."""

    def __init__(self, graph: LaneGraph, route: Route):
        self.route = route
        pts: list[np.ndarray] = []
        limits: list[float] = []
        seg_of_point: list[int] = []
        for idx, sid in enumerate(route.segment_ids):
            seg = graph.segments[sid]
            cl, sl = seg.centerline, seg.speed_limits
            if pts and np.allclose(pts[-1], cl[0], atol=1e-6):
                cl, sl = cl[1:], sl[1:]
            for p, l in zip(cl, sl):
                pts.append(np.asarray(p, dtype=float))
                limits.append(float(l))
                seg_of_point.append(idx)
        self.points = np.array(pts)
        self.speed_limits = np.array(limits)
        self.seg_index = np.array(seg_of_point)
        deltas = np.diff(self.points, axis=0)
        self.cum_s = np.concatenate([[0.0], np.cumsum(np.hypot(deltas[:, 0], deltas[:, 1]))])
        self.length = float(self.cum_s[-1])

        # traffic lights projected onto the path
        self.lights: list[tuple[TrafficLightSite, float]] = []
        for sid in route.segment_ids:
            for light in graph.lights_on_segment(sid):
                s, _, _ = self.project(light.stop_point.position())
                self.lights.append((light, s))
        self.lights.sort(key=lambda t: t[1])

    def project(self, xy: np.ndarray) -> tuple[float, float, int]:
        """Project a point onto the path.

        Returns (arc_offset, signed lateral deviation, point index of the
        winning polyline edge). Deviation is positive left of travel.
        Ties between equidistant edges go to the lower index.
        """
        a = self.points[:-1]
        b = self.points[1:]
        ab = b - a
        ab_len2 = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-12)
        t = np.clip(np.einsum("ij,ij->i", xy - a, ab) / ab_len2, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d2 = np.einsum("ij,ij->i", xy - proj, xy - proj)
        i = int(np.argmin(d2))
        s = float(self.cum_s[i] + t[i] * math.sqrt(ab_len2[i]))
        direction = ab[i] / math.sqrt(ab_len2[i])
        rel = xy - proj[i]
        lateral = float(direction[0] * rel[1] - direction[1] * rel[0])
        return s, lateral, i

    def point_at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        x = np.interp(s, self.cum_s, self.points[:, 0])
        y = np.interp(s, self.cum_s, self.points[:, 1])
        return np.array([x, y])

    def heading_at(self, s: float) -> float:
        i = int(np.searchsorted(self.cum_s, min(max(s, 0.0), self.length), side="right")) - 1
        i = min(max(i, 0), len(self.points) - 2)
        d = self.points[i + 1] - self.points[i]
        return math.atan2(d[1], d[0])

    def limit_at(self, s) -> np.ndarray:
        return np.interp(s, self.cum_s, self.speed_limits)


@dataclass
class WaypointWindow:
    positions: np.ndarray       # (W, 2)
    headings: np.ndarray        # (W,)
    speed_limits: np.ndarray    # (W,)
    arc_lengths: np.ndarray     # (W,) cumulative from the projection point
    start_s: float              # arc offset of the window start on the route
    lights: list[tuple[TrafficLightSite, float]]  # distance-along-path from window start
    route_remaining: float


def locate_on_route(path: RoutePath, pose: Pose2D,
                    capture_radius: float = 5.0) -> tuple[str, float, float]:
    """(segment_id, arc_offset, signed lateral deviation) of a pose on the route."""
    s, lateral, edge = path.project(pose.position())
    if abs(lateral) > capture_radius:
        # lateral is the perpendicular distance for interior projections;
        # re-check with the true euclidean distance for endpoint clamps
        d = float(np.linalg.norm(pose.position() - path.point_at(s)))
        if d > capture_radius:
            raise OffRouteError(f"pose is {d:.2f} m from the route (limit {capture_radius} m)")
    seg_idx = int(path.seg_index[edge])
    seg_id = path.route.segment_ids[seg_idx]
    return seg_id, s, lateral


def waypoint_window(path: RoutePath, pose: Pose2D, horizon: float,
                    spacing: float = 1.0, capture_radius: float = 5.0) -> WaypointWindow:
    """Waypoints resampled at fixed spacing ahead of the pose projection."""
    _, s0, _ = locate_on_route(path, pose, capture_radius)
    span = min(horizon, path.length - s0)
    n = int(math.floor(span / spacing + 1e-9)) + 1
    local = np.arange(n) * spacing
    if span - local[-1] > 1e-9:
        local = np.append(local, span)
    s_abs = s0 + local
    positions = np.stack([path.point_at(s) for s in s_abs])
    headings = np.array([path.heading_at(s) for s in s_abs])
    limits = path.limit_at(s_abs)
    lights = [(site, s - s0) for site, s in path.lights if s0 - 1e-9 <= s <= s0 + span + 1e-9]
    return WaypointWindow(
        positions=positions,
        headings=headings,
        speed_limits=np.asarray(limits, dtype=float),
        arc_lengths=local,
        start_s=s0,
        lights=lights,
        route_remaining=path.length - s0,
    )
