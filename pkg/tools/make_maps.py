#!/usr/bin/env python3
"""Generate the bundled synthetic GeoJSON maps.

Run from the repo root after an editable install:

    python tools/make_maps.py

Writes src/adsim/data/maps/straight_2km.geojson and loop_3km.geojson.
Geometry is authored in ENU meters around a reference point and converted
to geodetic coordinates for the GeoJSON output.
"""

import json
import math
from pathlib import Path

import numpy as np

from adsim.geo import GeodeticPoint, enu_to_geodetic

REFERENCE = GeodeticPoint(latitude=49.61, longitude=6.13, altitude=300.0)
OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "adsim" / "data" / "maps"

KMH = 1.0 / 3.6


def to_lonlat(x, y):
    g = enu_to_geodetic(float(x), float(y), 0.0, REFERENCE)
    return [round(g.longitude, 9), round(g.latitude, 9)]


def lane_feature(seg_id, points_xy, speed_limit, parents, children):
    return {
        "type": "Feature",
        "properties": {
            "type": "lane",
            "id": seg_id,
            "parents": parents,
            "children": children,
            "speed_limit": round(speed_limit, 4),
        },
        "geometry": {
            "type": "LineString",
            "coordinates": [to_lonlat(x, y) for x, y in points_xy],
        },
    }


def light_feature(light_id, pos_xy, stop_xy, governs):
    return {
        "type": "Feature",
        "properties": {
            "type": "traffic_light",
            "id": light_id,
            "governs": governs,
            "stop_point": to_lonlat(*stop_xy),
        },
        "geometry": {"type": "Point", "coordinates": to_lonlat(*pos_xy)},
    }


def collection(features):
    return {
        "type": "FeatureCollection",
        "properties": {
            "reference_point": [REFERENCE.longitude, REFERENCE.latitude,
                                REFERENCE.altitude],
        },
        "features": features,
    }


def make_straight():
    """2 km straight east, four 500 m segments, one mid-block light."""
    features = []
    seg_len, n_seg, spacing = 500.0, 4, 10.0
    for i in range(n_seg):
        x0 = i * seg_len
        xs = np.arange(x0, x0 + seg_len + 1e-6, spacing)
        pts = [(x, 0.0) for x in xs]
        parents = [f"s{i - 1}"] if i > 0 else []
        children = [f"s{i + 1}"] if i < n_seg - 1 else []
        features.append(lane_feature(f"s{i}", pts, 40 * KMH, parents, children))
    features.append(light_feature("tl1", (150.0, 4.0), (150.0, 0.0), "s0"))
    return collection(features)


def arc_points(cx, cy, r, a0, a1, spacing=3.0):
    n = max(int(abs(a1 - a0) * r / spacing), 4)
    return [(cx + r * math.cos(a), cy + r * math.sin(a))
            for a in np.linspace(a0, a1, n + 1)]


def line_points(p0, p1, spacing=5.0):
    p0, p1 = np.array(p0, dtype=float), np.array(p1, dtype=float)
    n = max(int(np.linalg.norm(p1 - p0) / spacing), 2)
    return [tuple(p) for p in np.linspace(p0, p1, n + 1)]


def make_loop():
    """~3 km closed loop: rounded rectangle, one tight roundabout-like corner.

    Counter-clockwise. Corners SE, NE, NW use radius 60 m; the SW corner is
    a tight 20 m curve. Straights at 40 km/h, wide corners at 30 km/h, the
    tight corner at 20 km/h.
    """
    wx, wy = 1050.0, 520.0   # rectangle outer size
    r, rt = 60.0, 20.0       # corner radii (regular, tight)
    pieces = []              # (kind, points, limit)
    v_straight, v_corner, v_tight = 40 * KMH, 30 * KMH, 20 * KMH

    # south straight: from after the SW tight corner to before the SE corner
    pieces.append(("s_south", line_points((rt, 0.0), (wx - r, 0.0)), v_straight))
    pieces.append(("c_se", arc_points(wx - r, r, r, -math.pi / 2, 0.0), v_corner))
    pieces.append(("s_east", line_points((wx, r), (wx, wy - r)), v_straight))
    pieces.append(("c_ne", arc_points(wx - r, wy - r, r, 0.0, math.pi / 2), v_corner))
    pieces.append(("s_north", line_points((wx - r, wy), (r, wy)), v_straight))
    pieces.append(("c_nw", arc_points(r, wy - r, r, math.pi / 2, math.pi), v_corner))
    pieces.append(("s_west", line_points((0.0, wy - r), (0.0, rt)), v_straight))
    pieces.append(("c_sw_tight", arc_points(rt, rt, rt, math.pi, 1.5 * math.pi), v_tight))

    # split long straights so the loop has a finer routable granularity
    split = []
    for name, pts, limit in pieces:
        if name.startswith("s_") and len(pts) > 40:
            mid = len(pts) // 2
            split.append((name + "_a", pts[:mid + 1], limit))
            split.append((name + "_b", pts[mid:], limit))
        else:
            split.append((name, pts, limit))

    features = []
    n = len(split)
    for i, (name, pts, limit) in enumerate(split):
        parents = [split[(i - 1) % n][0]]
        children = [split[(i + 1) % n][0]]
        features.append(lane_feature(name, pts, limit, parents, children))

    # five lights, stop points snapped onto the centerline
    def seg_point(name, frac):
        pts = next(p for nm, p, _ in split if nm == name)
        idx = int(frac * (len(pts) - 1))
        return pts[idx]

    lights = [
        ("tl_south", "s_south_b", 0.6),
        ("tl_east", "s_east_a", 0.5),
        ("tl_north", "s_north_a", 0.5),
        ("tl_north2", "s_north_b", 0.7),
        ("tl_west", "s_west_b", 0.4),
    ]
    for lid, seg, frac in lights:
        sx, sy = seg_point(seg, frac)
        features.append(light_feature(lid, (sx + 4.0, sy + 4.0), (sx, sy), seg))
    return collection(features)


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for name, doc in (("straight_2km", make_straight()), ("loop_3km", make_loop())):
        path = OUT_DIR / f"{name}.geojson"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
