"""Geodetic <-> local Cartesian (ENU) conversion and shared pose types.

The local frame is East-North-Up anchored at a geodetic reference point,
computed exactly through an ECEF intermediate on the WGS-84 ellipsoid.
Headings are measured counter-clockwise from East (the ENU x axis) and
normalized to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# WGS-84 ellipsoid
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)


@dataclass(frozen=True)
class GeodeticPoint:
    """Latitude/longitude in degrees, altitude in meters above the ellipsoid."""

    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        if abs(self.latitude) > 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if abs(self.longitude) > 180.0:
            raise ValueError(f"longitude out of range: {self.longitude}")


@dataclass(frozen=True)
class Pose2D:
    """Planar pose in the map ENU frame. x=East, y=North, heading CCW from East."""

    x: float
    y: float
    heading: float = 0.0

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class VehicleState:
    """Ego state shared across the stack."""

    pose: Pose2D
    speed: float = 0.0
    acceleration: float = 0.0
    steering_angle: float = 0.0
    timestamp: float = 0.0
    position_covariance: np.ndarray = field(
        default_factory=lambda: np.diag([0.0025, 0.0025])
    )

    def __post_init__(self):
        if self.speed < 0.0:
            raise ValueError("speed must be >= 0")
        cov = np.asarray(self.position_covariance, dtype=float)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise ValueError("position_covariance must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(cov).min() < -1e-12:
            raise ValueError("position_covariance must be PSD")
        self.position_covariance = cov

    def position_stddev(self) -> float:
        """Largest 1-sigma horizontal position uncertainty in meters."""
        return float(math.sqrt(max(np.linalg.eigvalsh(self.position_covariance).max(), 0.0)))


def normalize_heading(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - angle) % (2.0 * math.pi)


def geodetic_to_ecef(point: GeodeticPoint) -> tuple[float, float, float]:
    lat = math.radians(point.latitude)
    lon = math.radians(point.longitude)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    x = (n + point.altitude) * cos_lat * math.cos(lon)
    y = (n + point.altitude) * cos_lat * math.sin(lon)
    z = (n * (1.0 - WGS84_E2) + point.altitude) * sin_lat
    return x, y, z


def ecef_to_geodetic(x: float, y: float, z: float) -> GeodeticPoint:
    lon = math.atan2(y, x)
    p = math.hypot(x, y)
    # Iterative latitude; converges to well below 1e-9 m for |alt| < 10 km.
    lat = math.atan2(z, p * (1.0 - WGS84_E2))
    for _ in range(10):
        sin_lat = math.sin(lat)
        n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
        lat = math.atan2(z + WGS84_E2 * n * sin_lat, p)
    sin_lat = math.sin(lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    if abs(math.cos(lat)) > 1e-12:
        alt = p / math.cos(lat) - n
    else:
        alt = abs(z) - n * (1.0 - WGS84_E2)
    return GeodeticPoint(math.degrees(lat), math.degrees(lon), alt)


def _enu_rotation(reference: GeodeticPoint) -> np.ndarray:
    lat = math.radians(reference.latitude)
    lon = math.radians(reference.longitude)
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array(
        [
            [-so, co, 0.0],
            [-sl * co, -sl * so, cl],
            [cl * co, cl * so, sl],
        ]
    )


def geodetic_to_enu(
    point: GeodeticPoint, reference: GeodeticPoint
) -> tuple[float, float, float]:
    """Convert a geodetic point to East/North/Up offsets from the reference."""
    ecef = np.array(geodetic_to_ecef(point))
    ecef_ref = np.array(geodetic_to_ecef(reference))
    enu = _enu_rotation(reference) @ (ecef - ecef_ref)
    return float(enu[0]), float(enu[1]), float(enu[2])


def enu_to_geodetic(
    x: float, y: float, z: float, reference: GeodeticPoint
) -> GeodeticPoint:
    """Exact inverse of :func:`geodetic_to_enu` (sub-micrometer within 10 km)."""
    ecef_ref = np.array(geodetic_to_ecef(reference))
    ecef = ecef_ref + _enu_rotation(reference).T @ np.array([x, y, z])
    return ecef_to_geodetic(float(ecef[0]), float(ecef[1]), float(ecef[2]))
