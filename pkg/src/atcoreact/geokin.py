"""Geodesy and kinematics primitives.

Distances are nautical miles, times seconds, horizontal speeds knots,
vertical speeds feet per minute, altitudes feet. Courses are degrees
clockwise from true north.

Pairwise geometry (CPA, crossing point) is solved on a local azimuthal
equidistant plane. The ``*_planar`` functions accept numpy arrays and
broadcast, which is what the conflict detector uses to test whole
evolution fans at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

# Mean Earth radius (IUGG) expressed in nautical miles.
EARTH_RADIUS_NM = 6371008.8 / 1852.0
KT_TO_NM_PER_S = 1.0 / 3600.0
FPM_TO_FT_PER_S = 1.0 / 60.0

# Tracks whose directions differ by less than this sine (~0.06 deg) are parallel.
PARALLEL_SIN_TOL = 1e-3


@dataclass(frozen=True)
class GeoPoint:
    lon: float
    lat: float
    alt: float = 0.0

    def __post_init__(self):
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not math.isfinite(self.alt):
            raise ValueError(f"altitude not finite: {self.alt}")


@dataclass(frozen=True)
class Kinematics:
    course: float
    h_speed: float
    v_speed: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.course) and math.isfinite(self.h_speed)
                and math.isfinite(self.v_speed)):
            raise ValueError("kinematics must be finite")
        if self.h_speed < 0:
            raise ValueError(f"negative horizontal speed: {self.h_speed}")
        object.__setattr__(self, "course", normalize_course(self.course))


@dataclass(frozen=True)
class CpaResult:
    t_cpa: float
    d_h_cpa: float
    d_v_cpa: float


@dataclass(frozen=True)
class CrossingResult:
    exists: bool
    crossed: bool = False
    d_cp: Optional[float] = None
    t_cp: Optional[float] = None
    # intersection in the pair's tangent plane (nm), useful for diagnostics
    point_xy: Optional[Tuple[float, float]] = None


def normalize_course(course):
    c = course % 360.0
    # float modulo can round a tiny negative up to exactly 360.0
    if np.ndim(c) == 0:
        return 0.0 if c >= 360.0 else float(c)
    return np.where(c >= 360.0, 0.0, c)


def horizontal_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle (haversine) distance in nautical miles."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2.0 * EARTH_RADIUS_NM * math.asin(min(1.0, math.sqrt(h)))


def initial_bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Initial great-circle bearing from a to b, degrees in [0, 360)."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    dlon = lon2 - lon1
    y = math.sin(dlon) * math.cos(lat2)
    x = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    return normalize_course(math.degrees(math.atan2(y, x)))


def destination(origin: GeoPoint, course: float, distance_nm: float, alt: Optional[float] = None) -> GeoPoint:
    """Point reached flying ``distance_nm`` along the great circle with initial ``course``."""
    lat1, lon1 = math.radians(origin.lat), math.radians(origin.lon)
    brg = math.radians(course)
    d = distance_nm / EARTH_RADIUS_NM
    lat2 = math.asin(math.sin(lat1) * math.cos(d) + math.cos(lat1) * math.sin(d) * math.cos(brg))
    lon2 = lon1 + math.atan2(math.sin(brg) * math.sin(d) * math.cos(lat1),
                             math.cos(d) - math.sin(lat1) * math.sin(lat2))
    lon = (math.degrees(lon2) + 540.0) % 360.0 - 180.0
    return GeoPoint(lon, math.degrees(lat2), origin.alt if alt is None else alt)


def estimate_kinematics(prev: GeoPoint, t_prev: float, cur: GeoPoint, t_cur: float,
                        prev_course: Optional[float] = None) -> Kinematics:
    """Course, ground speed and vertical rate from two timed positions.

    When the two positions coincide horizontally the course is undefined;
    ``prev_course`` is carried forward (0 if none is known).
    """
    dt = t_cur - t_prev
    if dt <= 0:
        raise ValueError(f"non-increasing timestamps: {t_prev} -> {t_cur}")
    dist = horizontal_distance(prev, cur)
    if dist > 0.0:
        course = initial_bearing(prev, cur)
    else:
        course = 0.0 if prev_course is None else prev_course
    return Kinematics(course, dist / dt * 3600.0, (cur.alt - prev.alt) / dt * 60.0)


# --- local tangent plane -------------------------------------------------

class TangentPlane:
    """Azimuthal equidistant projection centred on a point; x east, y north, nm."""

    def __init__(self, lon0: float, lat0: float):
        self.lon0 = lon0
        self.lat0 = lat0
        self._lam0 = math.radians(lon0)
        self._phi0 = math.radians(lat0)
        self._sin0 = math.sin(self._phi0)
        self._cos0 = math.cos(self._phi0)

    @classmethod
    def between(cls, a: GeoPoint, b: GeoPoint) -> "TangentPlane":
        """Plane centred on the great-circle midpoint; symmetric in a and b."""
        va = _unit_vector(a)
        vb = _unit_vector(b)
        s = (va[0] + vb[0], va[1] + vb[1], va[2] + vb[2])
        n = math.sqrt(s[0] ** 2 + s[1] ** 2 + s[2] ** 2)
        if n < 1e-12:
            return cls(a.lon, a.lat)
        return cls(math.degrees(math.atan2(s[1], s[0])), math.degrees(math.asin(s[2] / n)))

    def forward(self, lon, lat):
        if isinstance(lon, float) and isinstance(lat, float):
            return self._forward_scalar(lon, lat)
        lam = np.radians(lon) - self._lam0
        phi = np.radians(lat)
        cos_c = self._sin0 * np.sin(phi) + self._cos0 * np.cos(phi) * np.cos(lam)
        cos_c = np.clip(cos_c, -1.0, 1.0)
        c = np.arccos(cos_c)
        with np.errstate(invalid="ignore", divide="ignore"):
            k = np.where(c < 1e-12, 1.0, c / np.sin(c))
        x = EARTH_RADIUS_NM * k * np.cos(phi) * np.sin(lam)
        y = EARTH_RADIUS_NM * k * (self._cos0 * np.sin(phi) - self._sin0 * np.cos(phi) * np.cos(lam))
        if np.ndim(x) == 0:
            return float(x), float(y)
        return x, y

    def _forward_scalar(self, lon: float, lat: float):
        lam = math.radians(lon) - self._lam0
        phi = math.radians(lat)
        sp, cp, cl = math.sin(phi), math.cos(phi), math.cos(lam)
        c = math.acos(min(1.0, max(-1.0, self._sin0 * sp + self._cos0 * cp * cl)))
        k = 1.0 if c < 1e-12 else c / math.sin(c)
        return (EARTH_RADIUS_NM * k * cp * math.sin(lam),
                EARTH_RADIUS_NM * k * (self._cos0 * sp - self._sin0 * cp * cl))

    def inverse(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        rho = np.hypot(x, y)
        c = rho / EARTH_RADIUS_NM
        sin_c, cos_c = np.sin(c), np.cos(c)
        with np.errstate(invalid="ignore", divide="ignore"):
            phi = np.where(rho < 1e-12, self._phi0,
                           np.arcsin(np.clip(cos_c * self._sin0 + y * sin_c * self._cos0 / rho, -1, 1)))
        lam = self._lam0 + np.arctan2(x * sin_c, rho * self._cos0 * cos_c - y * self._sin0 * sin_c)
        lon = (np.degrees(lam) + 540.0) % 360.0 - 180.0
        lat = np.degrees(phi)
        if lon.ndim == 0:
            return float(lon), float(lat)
        return lon, lat

    @staticmethod
    def velocity(course, h_speed):
        """Plane velocity (nm/s) for ground course(s) and speed(s).

        Courses are taken relative to the plane's north everywhere, so equal
        courses stay parallel; meridian convergence is ignored at en-route
        pair ranges.
        """
        ang = np.radians(np.asarray(course, dtype=float))
        v = np.asarray(h_speed, dtype=float) * KT_TO_NM_PER_S
        vx, vy = v * np.sin(ang), v * np.cos(ang)
        if np.ndim(vx) == 0:
            return float(vx), float(vy)
        return vx, vy


def _unit_vector(p: GeoPoint):
    lat, lon = math.radians(p.lat), math.radians(p.lon)
    return (math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat))


# --- planar pair geometry --------------------------------------------------

def cpa_planar(pax, pay, vax, vay, pbx, pby, vbx, vby):
    """Time to and distance at the closest point of approach.

    Inputs broadcast. Diverging pairs clamp to t = 0; identical velocities
    give t = 0 and the current separation.
    """
    dpx, dpy = np.subtract(pbx, pax), np.subtract(pby, pay)
    dvx, dvy = np.subtract(vbx, vax), np.subtract(vby, vay)
    dv2 = dvx * dvx + dvy * dvy
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(dv2 > 0.0, -(dpx * dvx + dpy * dvy) / np.where(dv2 > 0.0, dv2, 1.0), 0.0)
    t = np.maximum(t, 0.0)
    d = np.hypot(dpx + t * dvx, dpy + t * dvy)
    if np.ndim(t) == 0:
        return float(t), float(d)
    return t, d


def crossing_planar(pax, pay, vax, vay, pbx, pby, vbx, vby):
    """Intersection of two track rays on the plane.

    Returns arrays ``(exists, crossed, t_cp, d_cp, cx, cy)``. Track
    directions come from the velocities. Opposite parallel tracks are
    given the abeam point, where the two pass each other, as their
    crossing point; same-direction parallel tracks have no crossing.
    """
    pax, pay, vax, vay, pbx, pby, vbx, vby = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (pax, pay, vax, vay, pbx, pby, vbx, vby)))
    sa = np.hypot(vax, vay)
    sb = np.hypot(vbx, vby)
    with np.errstate(invalid="ignore", divide="ignore"):
        uax, uay = vax / sa, vay / sa
        ubx, uby = vbx / sb, vby / sb
    dpx, dpy = pbx - pax, pby - pay
    denom = uax * uby - uay * ubx
    parallel = np.abs(denom) < PARALLEL_SIN_TOL
    safe = np.where(parallel, 1.0, denom)
    # ray parameters (nm along each track)
    ra = (dpx * uby - dpy * ubx) / safe
    rb = (dpx * uay - dpy * uax) / safe
    exists = ~parallel & (sa > 0) & (sb > 0)
    crossed = exists & ((ra < 0) | (rb < 0))
    with np.errstate(invalid="ignore", divide="ignore"):
        ta = np.where(sa > 0, ra / sa, np.inf)
        tb = np.where(sb > 0, rb / sb, np.inf)
    # ownship wins ties
    t_first = np.where(ta <= tb, ta, tb)

    # opposite parallel tracks: crossing point is where they pass abeam
    along = dpx * uax + dpy * uay
    headon = parallel & (sa > 0) & (sb > 0) & (uax * ubx + uay * uby < 0)
    closing = along > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        t_meet = np.abs(along) / (sa + sb)
    exists = exists | headon
    crossed = np.where(headon, ~closing, crossed)
    t_cp = np.where(headon, t_meet, t_first)
    t_cp = np.where(exists, t_cp, np.nan)

    tt = np.where(np.isfinite(t_cp), t_cp, 0.0)
    d_cp = np.hypot(dpx + tt * (vbx - vax), dpy + tt * (vby - vay))
    d_cp = np.where(exists, d_cp, np.nan)
    cx = np.where(headon, pax + vax * tt, pax + uax * ra)
    cy = np.where(headon, pay + vay * tt, pay + uay * ra)
    cx = np.where(exists, cx, np.nan)
    cy = np.where(exists, cy, np.nan)
    return exists, crossed, t_cp, d_cp, cx, cy


# --- geographic wrappers ----------------------------------------------------

def _pair_on_plane(a: GeoPoint, ka: Kinematics, b: GeoPoint, kb: Kinematics):
    plane = TangentPlane.between(a, b)
    pax, pay = plane.forward(a.lon, a.lat)
    pbx, pby = plane.forward(b.lon, b.lat)
    vax, vay = plane.velocity(ka.course, ka.h_speed)
    vbx, vby = plane.velocity(kb.course, kb.h_speed)
    return plane, (pax, pay, vax, vay, pbx, pby, vbx, vby)


def cpa(a: GeoPoint, ka: Kinematics, b: GeoPoint, kb: Kinematics) -> CpaResult:
    _, args = _pair_on_plane(a, ka, b, kb)
    t, d = cpa_planar(*args)
    dv = abs((b.alt - a.alt) + t * (kb.v_speed - ka.v_speed) * FPM_TO_FT_PER_S)
    return CpaResult(t, d, dv)


def crossing_point(a: GeoPoint, ka: Kinematics, b: GeoPoint, kb: Kinematics) -> CrossingResult:
    _, args = _pair_on_plane(a, ka, b, kb)
    exists, crossed, t_cp, d_cp, cx, cy = crossing_planar(*args)
    if not bool(exists):
        return CrossingResult(False)
    return CrossingResult(True, bool(crossed), float(d_cp), float(t_cp), (float(cx), float(cy)))
