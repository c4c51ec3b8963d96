"""Shared helpers for the test suite: synthetic map documents and
brute-force oracles kept deliberately independent of the package internals."""

import itertools
import json
import math

import numpy as np

from adsim.geo import GeodeticPoint, enu_to_geodetic

MAP_REF = GeodeticPoint(latitude=49.61, longitude=6.13, altitude=300.0)


def _lonlat(x, y):
    p = enu_to_geodetic(float(x), float(y), 0.0, MAP_REF)
    return [p.longitude, p.latitude]


def make_map_text(segments, lights=(), reference=MAP_REF):
    """Build a GeoJSON vector-map document from local-meter geometry.

    ``segments``: iterable of dicts with keys id, points ((N,2) local meters),
    optional children/parents/speed_limit. ``lights``: dicts with id, position,
    governs and optional stop_point (local meters).
    """
    features = []
    for seg in segments:
        features.append({
            "type": "Feature",
            "properties": {
                "type": "lane",
                "id": seg["id"],
                "parents": list(seg.get("parents", [])),
                "children": list(seg.get("children", [])),
                "speed_limit": seg.get("speed_limit", 13.89),
            },
            "geometry": {
                "type": "LineString",
                "coordinates": [_lonlat(x, y) for x, y in seg["points"]],
            },
        })
    for light in lights:
        props = {"type": "traffic_light", "id": light["id"],
                 "governs": light["governs"]}
        if "stop_point" in light:
            props["stop_point"] = _lonlat(*light["stop_point"])
        features.append({
            "type": "Feature",
            "properties": props,
            "geometry": {"type": "Point",
                         "coordinates": _lonlat(*light["position"])},
        })
    return json.dumps({
        "type": "FeatureCollection",
        "properties": {"reference_point": [reference.longitude,
                                           reference.latitude,
                                           reference.altitude]},
        "features": features,
    })


def straight_segment(seg_id, x0, x1, y=0.0, n=None, **kw):
    if n is None:
        n = max(2, int(abs(x1 - x0)) + 1)
    xs = np.linspace(x0, x1, n)
    return {"id": seg_id, "points": [(x, y) for x in xs], **kw}


def brute_force_route(lengths, children, start, goal, max_depth=16):
    """Exhaustive minimum-length route by depth-first enumeration of all
    simple paths. Returns (segment_ids, total_length) or None."""
    best = None

    def visit(node, path, total):
        nonlocal best
        if len(path) > max_depth:
            return
        if node == goal:
            if best is None or total < best[1] - 1e-12:
                best = (list(path), total)
            return
        for child in children.get(node, ()):
            if child in path:
                continue
            path.append(child)
            visit(child, path, total + lengths[child])
            path.pop()

    visit(start, [start], lengths[start])
    return best


def random_graph(rng, n_segments):
    """Random lane graph as (segments-for-make_map_text, lengths, children)."""
    ids = [f"g{i}" for i in range(n_segments)]
    lengths = {}
    children = {i: [] for i in ids}
    segs = []
    for i, sid in enumerate(ids):
        length = float(rng.uniform(20.0, 150.0))
        lengths[sid] = length
        # forward edges with random fan-out, plus occasional back edges
        for j in range(i + 1, n_segments):
            if rng.random() < 0.35:
                children[sid].append(ids[j])
        if i > 1 and rng.random() < 0.15:
            children[sid].append(ids[rng.integers(0, i)])
        segs.append(straight_segment(sid, 0.0, length, y=10.0 * i, n=2,
                                     children=None))
    for seg in segs:
        seg["children"] = children[seg["id"]]
    # recompute true polyline lengths (identical here: straight 2-point lines)
    return segs, lengths, children
