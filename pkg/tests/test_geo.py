import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsim.geo import (GeodeticPoint, Pose2D, VehicleState, WGS84_A, WGS84_E2,
                       ecef_to_geodetic, enu_to_geodetic, geodetic_to_ecef,
                       geodetic_to_enu, normalize_heading)

REF = GeodeticPoint(latitude=49.6, longitude=6.1, altitude=300.0)


def oracle_ecef(lat_deg, lon_deg, alt):
    """Independent ECEF conversion written from the standard closed form."""
    lat, lon = math.radians(lat_deg), math.radians(lon_deg)
    a = 6378137.0
    e2 = 6.69437999014e-3
    n = a / math.sqrt(1.0 - e2 * math.sin(lat) ** 2)
    return np.array([
        (n + alt) * math.cos(lat) * math.cos(lon),
        (n + alt) * math.cos(lat) * math.sin(lon),
        (n * (1.0 - e2) + alt) * math.sin(lat),
    ])


class TestGeodeticToEnu:
    def test_reference_maps_to_origin(self):
        x, y, z = geodetic_to_enu(REF, REF)
        assert abs(x) < 1e-9 and abs(y) < 1e-9 and abs(z) < 1e-9

    def test_small_latitude_offset_against_meridian_arc(self):
        # oracle: meridian radius of curvature M = a(1-e^2)/(1-e^2 sin^2)^1.5,
        # arc = M * dphi; second-order error ~1e-7 m at this offset
        dlat = 1e-5
        point = GeodeticPoint(REF.latitude + dlat, REF.longitude, REF.altitude)
        lat = math.radians(REF.latitude)
        m = (WGS84_A * (1.0 - WGS84_E2)
             / (1.0 - WGS84_E2 * math.sin(lat) ** 2) ** 1.5)
        expected = (m + REF.altitude) * math.radians(dlat)
        x, y, _ = geodetic_to_enu(point, REF)
        assert abs(y - expected) < 1e-3
        assert abs(y - 1.11) < 0.01  # sanity: about 1.11 m per 1e-5 degree

    def test_longitude_motion_is_east_at_first_order(self):
        point = GeodeticPoint(REF.latitude, REF.longitude + 1e-4, REF.altitude)
        x, y, _ = geodetic_to_enu(point, REF)
        assert x > 0
        assert abs(y) < 1e-3 * abs(x)

    def test_pure_up_offset(self):
        p = enu_to_geodetic(0.0, 0.0, 10.0, REF)
        assert p.altitude == pytest.approx(REF.altitude + 10.0, abs=1e-6)
        assert p.latitude == pytest.approx(REF.latitude, abs=1e-9)
        assert p.longitude == pytest.approx(REF.longitude, abs=1e-9)

    def test_enu_norm_equals_ecef_chord(self):
        # the ENU vector is a rotation of the ECEF difference, so its norm
        # must match the chord computed with an independent ECEF oracle
        rng = np.random.default_rng(1)
        for _ in range(50):
            dlat, dlon = rng.uniform(-5e-3, 5e-3, 2)
            dalt = rng.uniform(-50.0, 50.0)
            p = GeodeticPoint(REF.latitude + dlat, REF.longitude + dlon,
                              REF.altitude + dalt)
            enu = np.array(geodetic_to_enu(p, REF))
            chord = oracle_ecef(p.latitude, p.longitude, p.altitude) \
                - oracle_ecef(REF.latitude, REF.longitude, REF.altitude)
            assert np.linalg.norm(enu) == pytest.approx(
                np.linalg.norm(chord), rel=1e-9, abs=1e-9)


class TestRoundTrip:
    def test_round_trip_at_1km(self):
        p = enu_to_geodetic(800.0, -600.0, 5.0, REF)
        x, y, z = geodetic_to_enu(p, REF)
        assert abs(x - 800.0) < 1e-6
        assert abs(y + 600.0) < 1e-6
        assert abs(z - 5.0) < 1e-6

    @given(x=st.floats(-5000, 5000), y=st.floats(-5000, 5000),
           z=st.floats(-100, 100))
    @settings(max_examples=100, deadline=None)
    def test_round_trip_within_5km(self, x, y, z):
        p = enu_to_geodetic(x, y, z, REF)
        back = geodetic_to_enu(p, REF)
        assert abs(back[0] - x) < 1e-6
        assert abs(back[1] - y) < 1e-6
        assert abs(back[2] - z) < 1e-6

    def test_ecef_round_trip(self):
        p = GeodeticPoint(49.61, 6.13, 310.0)
        back = ecef_to_geodetic(*geodetic_to_ecef(p))
        assert back.latitude == pytest.approx(p.latitude, abs=1e-11)
        assert back.longitude == pytest.approx(p.longitude, abs=1e-11)
        assert back.altitude == pytest.approx(p.altitude, abs=1e-6)


class TestNormalizeHeading:
    def test_examples(self):
        assert normalize_heading(3 * math.pi) == pytest.approx(math.pi)
        assert normalize_heading(-math.pi) == pytest.approx(math.pi)
        assert normalize_heading(0.5) == pytest.approx(0.5)

    @given(st.floats(-100.0, 100.0))
    @settings(max_examples=200, deadline=None)
    def test_range_and_equivalence(self, angle):
        out = normalize_heading(angle)
        assert -math.pi < out <= math.pi
        assert math.isclose(math.sin(out), math.sin(angle), abs_tol=1e-9)
        assert math.isclose(math.cos(out), math.cos(angle), abs_tol=1e-9)


class TestTypes:
    def test_latitude_out_of_range(self):
        with pytest.raises(ValueError):
            GeodeticPoint(91.0, 0.0)

    def test_longitude_out_of_range(self):
        with pytest.raises(ValueError):
            GeodeticPoint(0.0, 181.0)

    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            VehicleState(pose=Pose2D(0.0, 0.0), speed=-1.0)

    def test_covariance_must_be_symmetric_psd(self):
        with pytest.raises(ValueError):
            VehicleState(pose=Pose2D(0.0, 0.0),
                         position_covariance=np.array([[1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            VehicleState(pose=Pose2D(0.0, 0.0),
                         position_covariance=np.array([[-1.0, 0.0], [0.0, 1.0]]))

    def test_position_stddev_is_largest_axis(self):
        s = VehicleState(pose=Pose2D(0.0, 0.0),
                         position_covariance=np.diag([0.04, 0.09]))
        assert s.position_stddev() == pytest.approx(0.3)
