import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from atcoreact.geokin import (
    EARTH_RADIUS_NM,
    GeoPoint,
    Kinematics,
    TangentPlane,
    cpa,
    cpa_planar,
    crossing_planar,
    crossing_point,
    destination,
    estimate_kinematics,
    horizontal_distance,
)


def brute_force_cpa(pa, va, pb, vb):
    """Dense 0.01 s scan followed by bounded scalar refinement."""
    dp = np.subtract(pb, pa)
    dv = np.subtract(vb, va)
    # Cauchy-Schwarz bound on the minimiser
    horizon = np.linalg.norm(dp) / max(np.linalg.norm(dv), 1e-12) + 1.0
    ts = np.arange(0.0, horizon + 0.01, 0.01)
    d = np.hypot(dp[0] + ts * dv[0], dp[1] + ts * dv[1])
    i = int(np.argmin(d))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
    if lo == hi:
        return ts[i], d[i]
    res = minimize_scalar(lambda t: math.hypot(dp[0] + t * dv[0], dp[1] + t * dv[1]),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if res.fun < d[i]:
        return res.x, res.fun
    return ts[i], d[i]


class TestHorizontalDistance:
    def test_identity(self):
        p = GeoPoint(0.0, 0.0)
        assert horizontal_distance(p, p) == 0.0

    def test_one_degree_latitude(self):
        # hand haversine: R * pi / 180 with R = 6371008.8 m / 1852
        expected = 6371008.8 / 1852.0 * math.pi / 180.0
        assert expected == pytest.approx(60.0405, abs=1e-4)
        d = horizontal_distance(GeoPoint(0.0, 0.0), GeoPoint(0.0, 1.0))
        assert d == pytest.approx(expected, rel=1e-12)
        assert d == pytest.approx(60.0, abs=0.1)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            a = GeoPoint(rng.uniform(-180, 180), rng.uniform(-90, 90))
            b = GeoPoint(rng.uniform(-180, 180), rng.uniform(-90, 90))
            assert horizontal_distance(a, b) == horizontal_distance(b, a)


def test_geopoint_validation():
    with pytest.raises(ValueError):
        GeoPoint(181.0, 0.0)
    with pytest.raises(ValueError):
        GeoPoint(0.0, -91.0)
    with pytest.raises(ValueError):
        GeoPoint(0.0, 0.0, float("nan"))


class TestEstimateKinematics:
    def test_due_north(self):
        k = estimate_kinematics(GeoPoint(5.0, 40.0), 0, GeoPoint(5.0, 40.1), 5)
        assert k.course == pytest.approx(0.0, abs=1e-9)

    def test_one_nm_east_in_five_seconds(self):
        start = GeoPoint(0.0, 0.0, 30000)
        end = destination(start, 90.0, 1.0)
        k = estimate_kinematics(start, 100, end, 105)
        assert k.course == pytest.approx(90.0, abs=1e-9)
        assert k.h_speed == pytest.approx(720.0, rel=1e-9)
        assert k.v_speed == 0.0

    def test_climb_rate(self):
        k = estimate_kinematics(GeoPoint(0, 0, 30000), 0, GeoPoint(0, 0.01, 30100), 5)
        assert k.v_speed == pytest.approx(1200.0)

    def test_coincident_positions_hold_course(self):
        p = GeoPoint(1.0, 1.0)
        assert estimate_kinematics(p, 0, p, 5, prev_course=123.0).course == 123.0
        assert estimate_kinematics(p, 0, p, 5).h_speed == 0.0

    def test_non_increasing_time_rejected(self):
        with pytest.raises(ValueError):
            estimate_kinematics(GeoPoint(0, 0), 5, GeoPoint(0, 1), 5)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-179, 179), st.floats(-80, 80), st.floats(-179, 179), st.floats(-80, 80))
    def test_ranges(self, lon1, lat1, lon2, lat2):
        k = estimate_kinematics(GeoPoint(lon1, lat1), 0, GeoPoint(lon2, lat2), 5)
        assert 0.0 <= k.course < 360.0
        assert k.h_speed >= 0.0


class TestCpaPlanar:
    def test_head_on(self):
        t, d = cpa_planar(0, 0, 1, 0, 10, 0, -1, 0)
        assert t == 5.0 and d == 0.0

    def test_perpendicular(self):
        # oracle: dense scan says the two meet at (5, 0) after 5 s
        tb, db = brute_force_cpa((0, 0), (1, 0), (5, 5), (0, -1))
        t, d = cpa_planar(0, 0, 1, 0, 5, 5, 0, -1)
        assert t == pytest.approx(tb, abs=1e-6) and t == pytest.approx(5.0)
        assert d == pytest.approx(db, abs=1e-6) and d == pytest.approx(0.0, abs=1e-12)

    def test_identical_velocity(self):
        t, d = cpa_planar(0, 0, 3, 4, 3, 4, 3, 4)
        assert t == 0.0 and d == 5.0

    def test_diverging_clamped(self):
        t, d = cpa_planar(0, 0, -1, 0, 10, 0, 1, 0)
        assert t == 0.0 and d == 10.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        n = 0
        while n < 200:
            pa, pb = rng.uniform(-10, 10, 2), rng.uniform(-10, 10, 2)
            va, vb = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
            if np.linalg.norm(vb - va) < 0.2:
                continue
            n += 1
            tb, db = brute_force_cpa(pa, va, pb, vb)
            t, d = cpa_planar(*pa, *va, *pb, *vb)
            assert math.isclose(d, db, rel_tol=1e-6, abs_tol=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            a = rng.uniform(-10, 10, 4)
            b = rng.uniform(-10, 10, 4)
            assert cpa_planar(*a, *b) == cpa_planar(*b, *a)


class TestCpaGeo:
    def test_head_on_fl350(self):
        # 40 nm apart, 480 kt each, closing speed 960 kt -> 150 s
        a = GeoPoint(0.0, 40.0, 35000)
        b = destination(a, 90.0, 40.0)
        res = cpa(a, Kinematics(90.0, 480.0), b, Kinematics(270.0, 480.0))
        assert res.t_cpa == pytest.approx(150.0, rel=1e-3)
        assert res.d_h_cpa < 0.2
        assert res.d_v_cpa == 0.0

    def test_vertical_at_t_cpa(self):
        a = GeoPoint(0.0, 0.0, 30000)
        b = GeoPoint(0.0, 0.0, 31000)
        res = cpa(a, Kinematics(0, 400, 0), b, Kinematics(0, 400, -600))
        assert res.t_cpa == 0.0
        assert res.d_v_cpa == 1000.0

    def test_symmetric(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            a = GeoPoint(rng.uniform(-5, 5), rng.uniform(35, 45), 30000)
            b = GeoPoint(rng.uniform(-5, 5), rng.uniform(35, 45), 30000)
            ka = Kinematics(rng.uniform(0, 360), rng.uniform(300, 500))
            kb = Kinematics(rng.uniform(0, 360), rng.uniform(300, 500))
            r1, r2 = cpa(a, ka, b, kb), cpa(b, kb, a, ka)
            assert r1.t_cpa == r2.t_cpa and r1.d_h_cpa == r2.d_h_cpa


class TestCrossing:
    def test_perpendicular_ahead(self):
        exists, crossed, t_cp, d_cp, cx, cy = crossing_planar(0, 0, 1, 0, 5, 10, 0, -1)
        assert exists and not crossed
        assert (cx, cy) == pytest.approx((5.0, 0.0))
        assert t_cp == pytest.approx(5.0)
        # when A reaches the crossing, B is still 5 units north of it
        assert d_cp == pytest.approx(5.0)

    def test_both_past(self):
        exists, crossed, *_ = crossing_planar(0, 0, -1, 0, 5, 10, 0, 1)
        assert exists and crossed

    def test_parallel_same_course(self):
        exists, *_ = crossing_planar(0, 0, 1, 0, 0, 5, 1, 0)
        assert not exists

    def test_collinear_head_on_meets(self):
        exists, crossed, t_cp, d_cp, cx, cy = crossing_planar(0, 0, 1, 0, 10, 0, -1, 0)
        assert exists and not crossed
        assert t_cp == pytest.approx(5.0) and d_cp == pytest.approx(0.0)

    def test_offset_head_on_uses_abeam_point(self):
        exists, crossed, t_cp, d_cp, *_ = crossing_planar(0, 0, 1, 0, 10, 3, -1, 0)
        assert exists and not crossed
        assert t_cp == pytest.approx(5.0) and d_cp == pytest.approx(3.0)
        exists, crossed, *_ = crossing_planar(0, 0, -1, 0, 10, 3, 1, 0)
        assert exists and crossed

    def test_tie_break_ownship(self):
        exists, crossed, t_cp, d_cp, *_ = crossing_planar(0, 0, 1, 0, 5, 5, 0, -1)
        assert t_cp == pytest.approx(5.0) and d_cp == pytest.approx(0.0)

    def test_intersection_lies_on_both_lines(self):
        rng = np.random.default_rng(5)
        pa, pb = rng.uniform(-50, 50, (2, 1000, 2))
        va, vb = rng.uniform(-1, 1, (2, 1000, 2))
        exists, crossed, t_cp, d_cp, cx, cy = crossing_planar(
            pa[:, 0], pa[:, 1], va[:, 0], va[:, 1], pb[:, 0], pb[:, 1], vb[:, 0], vb[:, 1])
        for p, v in ((pa, va), (pb, vb)):
            u = v / np.linalg.norm(v, axis=1, keepdims=True)
            resid = np.abs((cx - p[:, 0]) * u[:, 1] - (cy - p[:, 1]) * u[:, 0])
            assert np.all(resid[exists] < 1e-9 * np.maximum(1.0, np.hypot(cx, cy)[exists]))
        assert np.all(t_cp[exists & ~crossed] >= 0)

    def test_geo_wrapper(self):
        a = GeoPoint(0.0, 40.0, 35000)
        b = destination(destination(a, 90.0, 20.0), 0.0, 20.0)
        res = crossing_point(a, Kinematics(90.0, 480.0), b, Kinematics(180.0, 480.0))
        assert res.exists and not res.crossed
        assert res.t_cp == pytest.approx(150.0, rel=1e-2)
        assert crossing_point(a, Kinematics(90, 480), b, Kinematics(90, 480)).exists is False


def test_tangent_plane_round_trip():
    plane = TangentPlane(-3.0, 40.0)
    lon, lat = plane.inverse(*plane.forward(-1.0, 42.5))
    assert lon == pytest.approx(-1.0, abs=1e-10) and lat == pytest.approx(42.5, abs=1e-10)
    x, y = plane.forward(-3.0, 41.0)
    assert x == pytest.approx(0.0, abs=1e-9)
    assert y == pytest.approx(EARTH_RADIUS_NM * math.pi / 180.0, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-20, 20), st.floats(30, 50), st.floats(-20, 20), st.floats(30, 50))
def test_scalar_projection_matches_array(lon0, lat0, lon, lat):
    plane = TangentPlane(lon0, lat0)
    x, y = plane.forward(lon, lat)
    xs, ys = plane.forward(np.array([lon]), np.array([lat]))
    assert x == pytest.approx(xs[0], rel=1e-12, abs=1e-9)
    assert y == pytest.approx(ys[0], rel=1e-12, abs=1e-9)
