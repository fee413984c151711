"""Spatio-temporal grid index, fan-based conflict detection and per-point
feature enrichment."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .evofan import DeviationStats, fan_deltas
from .geokin import (
    PARALLEL_SIN_TOL,
    GeoPoint,
    TangentPlane,
    cpa_planar,
    crossing_planar,
    horizontal_distance,
    initial_bearing,
)

SECTOR_RELATED = "sector_related"
SECTOR_IGNORANT = "sector_ignorant"

NEIGHBOR_FIELDS = ("sin_bf", "cos_bf", "d_f", "d_h_cpa", "d_v_cpa", "t_cpa", "d_cp", "t_cp",
                   "sin_a", "cos_a", "sin_b", "cos_b", "present")
OWN_FIELDS = ("h", "s_h", "s_v")


class FixpointError(ValueError):
    pass


@dataclass
class DetectConfig:
    setting: str = SECTOR_IGNORANT
    # lon_min, lat_min, lon_max, lat_max
    sa_bounds: Tuple[float, float, float, float] = (-10.0, 35.0, 4.5, 44.0)
    sector_polygon: Optional[List[Tuple[float, float]]] = None
    cell_size: float = 0.5
    d_th_cells: Optional[int] = 5
    ct_th_min: float = 20.0
    cpa_d_h_th_nm: float = 15.0
    cpa_t_th_min: float = 30.0
    d_v_th_low_ft: float = 1000.0
    d_v_th_high_ft: float = 2000.0
    d_v_switch_ft: float = 41000.0
    max_neighbors: int = 4
    airports: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.setting not in (SECTOR_RELATED, SECTOR_IGNORANT):
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.setting == SECTOR_RELATED:
            if not self.sector_polygon or len(self.sector_polygon) < 3:
                raise ValueError("sector_related setting needs a sector polygon")
            self.d_th_cells = None
            lons = [p[0] for p in self.sector_polygon]
            lats = [p[1] for p in self.sector_polygon]
            self.sa_bounds = (min(lons), min(lats), max(lons), max(lats))
        for name in ("cell_size", "ct_th_min", "cpa_d_h_th_nm", "cpa_t_th_min",
                     "d_v_th_low_ft", "d_v_th_high_ft"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.d_th_cells is not None and self.d_th_cells < 0:
            raise ValueError("d_th_cells must be non-negative")
        if self.max_neighbors < 1:
            raise ValueError("max_neighbors must be >= 1")
        lo_lon, lo_lat, hi_lon, hi_lat = self.sa_bounds
        if not (hi_lon > lo_lon and hi_lat > lo_lat):
            raise ValueError("sa_bounds must have positive extent")

    @property
    def feature_dim(self) -> int:
        return len(OWN_FIELDS) + self.max_neighbors * len(NEIGHBOR_FIELDS)

    def d_v_th(self, alt_a: float, alt_b: float) -> float:
        return self.d_v_th_high_ft if max(alt_a, alt_b) >= self.d_v_switch_ft else self.d_v_th_low_ft


def point_in_polygon(lon: float, lat: float, poly: Sequence[Tuple[float, float]]) -> bool:
    """Even-odd ray casting in lon/lat coordinates."""
    inside = False
    n = len(poly)
    for k in range(n):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % n]
        if (y1 > lat) != (y2 > lat):
            x_cross = x1 + (lat - y1) * (x2 - x1) / (y2 - y1)
            if lon < x_cross:
                inside = not inside
    return inside


class GridIndex:
    """Per-timestamp map from grid cell to the flight points inside it.

    Cells are half-open: a point on an edge belongs to the cell whose lower
    bound it sits on. The box itself is half-open too.
    """

    def __init__(self, trajectories: Sequence, config: DetectConfig):
        self.trajectories = list(trajectories)
        self.config = config
        self.by_id = {tr.id: k for k, tr in enumerate(self.trajectories)}
        # t -> cell -> [(trajectory index, point index)]
        self.cells: Dict[int, Dict[Tuple[int, int], List[Tuple[int, int]]]] = defaultdict(lambda: defaultdict(list))
        # (trajectory index, point index) -> cell, for indexed points only
        self.point_cell: Dict[Tuple[int, int], Tuple[int, int]] = {}

    def cell_of(self, lon: float, lat: float) -> Optional[Tuple[int, int]]:
        lo_lon, lo_lat, hi_lon, hi_lat = self.config.sa_bounds
        if not (lo_lon <= lon < hi_lon and lo_lat <= lat < hi_lat):
            return None
        if self.config.sector_polygon and not point_in_polygon(lon, lat, self.config.sector_polygon):
            return None
        size = self.config.cell_size
        return int(math.floor((lon - lo_lon) / size)), int(math.floor((lat - lo_lat) / size))

    def add(self, k: int):
        tr = self.trajectories[k]
        for i in range(len(tr)):
            cell = self.cell_of(float(tr.lon[i]), float(tr.lat[i]))
            if cell is None:
                continue
            self.cells[int(tr.times[i])][cell].append((k, i))
            self.point_cell[(k, i)] = cell

    def lookup(self, cell: Tuple[int, int], t: int) -> List[Tuple[int, int]]:
        return list(self.cells.get(int(t), {}).get(cell, ()))

    def timestamps(self) -> List[int]:
        return sorted(self.cells)

    def at(self, t: int) -> List[Tuple[int, int]]:
        return [e for entries in self.cells.get(int(t), {}).values() for e in entries]

    def candidates(self, k: int, i: int) -> List[Tuple[int, int]]:
        """Points co-occurring with (k, i) inside the D_th cell window."""
        cell = self.point_cell.get((k, i))
        if cell is None:
            return []
        t = int(self.trajectories[k].times[i])
        by_cell = self.cells.get(t, {})
        d = self.config.d_th_cells
        if d is None:
            found = [e for entries in by_cell.values() for e in entries]
        elif (2 * d + 1) ** 2 > len(by_cell):
            found = [e for c, entries in by_cell.items()
                     if abs(c[0] - cell[0]) <= d and abs(c[1] - cell[1]) <= d for e in entries]
        else:
            found = []
            for ci in range(cell[0] - d, cell[0] + d + 1):
                for cj in range(cell[1] - d, cell[1] + d + 1):
                    found.extend(by_cell.get((ci, cj), ()))
        return [e for e in found if e[0] != k]


def build_grid(trajectories: Sequence, config: DetectConfig) -> GridIndex:
    grid = GridIndex(trajectories, config)
    for k in range(len(grid.trajectories)):
        grid.add(k)
    return grid


@dataclass(frozen=True)
class NeighborFeatures:
    intruder: str
    sin_bf: float
    cos_bf: float
    d_f: float
    d_h_cpa: float
    d_v_cpa: float
    t_cpa: float
    d_cp: float
    t_cp: float
    sin_a: float
    cos_a: float
    sin_b: float
    cos_b: float

    def as_row(self) -> List[float]:
        return [getattr(self, f) for f in NEIGHBOR_FIELDS[:-1]] + [1.0]


def _state(tr, i):
    return (float(tr.lon[i]), float(tr.lat[i]), float(tr.alt[i]),
            float(tr.course[i]), float(tr.h_speed[i]), float(tr.v_speed[i]))


def cr_satisfied(sa, sb, deltas: np.ndarray, config: DetectConfig) -> bool:
    """True if some pair of fan projections satisfies every CR constraint.

    ``sa``/``sb`` are ``(lon, lat, alt, course, h_speed, v_speed)`` tuples.
    """
    if abs(sb[2] - sa[2]) >= config.d_v_th(sa[2], sb[2]):
        return False
    plane = TangentPlane.between(GeoPoint(sa[0], sa[1]), GeoPoint(sb[0], sb[1]))
    pax, pay = plane.forward(sa[0], sa[1])
    pbx, pby = plane.forward(sb[0], sb[1])
    ct = config.ct_th_min * 60.0
    tt = config.cpa_t_th_min * 60.0
    dh = config.cpa_d_h_th_nm

    def check(vax, vay, vbx, vby):
        exists, crossed, t_cp, _, _, _ = crossing_planar(pax, pay, vax, vay, pbx, pby, vbx, vby)
        t_cpa, d_cpa = cpa_planar(pax, pay, vax, vay, pbx, pby, vbx, vby)
        with np.errstate(invalid="ignore"):
            ok = exists & ~crossed & (t_cp < ct) & (d_cpa < dh) & (t_cpa < tt)
        return bool(np.any(ok))

    grid = _as_grid(deltas)
    if grid is not None:
        # a product fan holds the nominal member, so one factored sweep covers it
        return _fan_grid_check(pbx - pax, pby - pay, sa, sb, *grid, ct, tt, dh)
    nominal = check(*TangentPlane.velocity(sa[3], sa[4]), *TangentPlane.velocity(sb[3], sb[4]))
    if nominal or len(deltas) == 1:
        return nominal
    vax, vay = TangentPlane.velocity(sa[3] + deltas[:, 0], np.maximum(sa[4] + deltas[:, 1], 0.0))
    vbx, vby = TangentPlane.velocity(sb[3] + deltas[:, 0], np.maximum(sb[4] + deltas[:, 1], 0.0))
    return check(vax[:, None], vay[:, None], vbx[None, :], vby[None, :])


def _as_grid(deltas: np.ndarray):
    """(course offsets, speed offsets) if the fan is their full product, else None."""
    deltas = np.ascontiguousarray(deltas, dtype=float)
    return _grid_of(deltas.tobytes(), deltas.shape)


@lru_cache(maxsize=16)
def _grid_of(raw: bytes, shape):
    deltas = np.frombuffer(raw).reshape(shape)
    dc, ds = np.unique(deltas[:, 0]), np.unique(deltas[:, 1])
    if len(np.unique(deltas, axis=0)) != len(dc) * len(ds):
        return None
    return dc, ds


def _fan_grid_check(dpx, dpy, sa, sb, dc, ds, ct, tt, dh) -> bool:
    """Fan-vs-fan CR test for a product fan, factored by course pair.

    Track directions (and so whether the tracks cross ahead of both) depend
    on the course pair only, so the speed grid is swept just for course
    pairs whose crossing lies ahead. Opposite parallel course pairs fall
    back to the generic planar routines.
    """
    ang_a, ang_b = np.radians(sa[3] + dc), np.radians(sb[3] + dc)
    uax, uay = np.sin(ang_a)[:, None], np.cos(ang_a)[:, None]
    ubx, uby = np.sin(ang_b)[None, :], np.cos(ang_b)[None, :]
    va = np.maximum(sa[4] + ds, 0.0) / 3600.0
    vb = np.maximum(sb[4] + ds, 0.0) / 3600.0
    moving_a, moving_b = va > 0, vb > 0
    denom = uax * uby - uay * ubx
    parallel = np.abs(denom) < PARALLEL_SIN_TOL
    safe = np.where(parallel, 1.0, denom)
    ra = (dpx * uby - dpy * ubx) / safe
    rb = (dpx * uay - dpy * uax) / safe
    ahead = ~parallel & (ra >= 0) & (rb >= 0)

    i, k = np.nonzero(ahead)
    if len(i):
        # axes: course pair, speed of a, speed of b
        with np.errstate(divide="ignore"):
            soon_a = (ra[i, k][:, None] / np.where(moving_a, va, 1.0)[None, :] < ct) & moving_a[None, :]
            soon_b = (rb[i, k][:, None] / np.where(moving_b, vb, 1.0)[None, :] < ct) & moving_b[None, :]
        cand = (soon_a[:, :, None] | soon_b[:, None, :]) & moving_a[None, :, None] & moving_b[None, None, :]
        if cand.any():
            A = (dpx * uax[i, 0] + dpy * uay[i, 0])[:, None, None]
            B = (dpx * ubx[0, k] + dpy * uby[0, k])[:, None, None]
            C = (uax[i, 0] * ubx[0, k] + uay[i, 0] * uby[0, k])[:, None, None]
            a_, b_ = va[None, :, None], vb[None, None, :]
            dot = b_ * B - a_ * A                      # dp . dv
            dv2 = a_ * a_ + b_ * b_ - 2.0 * a_ * b_ * C
            with np.errstate(invalid="ignore", divide="ignore"):
                t = np.where(dv2 > 0.0, -dot / np.where(dv2 > 0.0, dv2, 1.0), 0.0)
            t = np.maximum(t, 0.0)
            d2 = np.maximum(dpx * dpx + dpy * dpy + 2.0 * t * dot + t * t * dv2, 0.0)
            if np.any(cand & (d2 < dh * dh) & (t < tt)):
                return True

    i, k = np.nonzero(parallel & (uax * ubx + uay * uby < 0))
    if len(i):
        vax = (uax[i, 0][:, None] * va[None, :])[:, :, None]
        vay = (uay[i, 0][:, None] * va[None, :])[:, :, None]
        vbx = (ubx[0, k][:, None] * vb[None, :])[:, None, :]
        vby = (uby[0, k][:, None] * vb[None, :])[:, None, :]
        exists, crossed, t_cp, _, _, _ = crossing_planar(0.0, 0.0, vax, vay, dpx, dpy, vbx, vby)
        t_cpa, d_cpa = cpa_planar(0.0, 0.0, vax, vay, dpx, dpy, vbx, vby)
        with np.errstate(invalid="ignore"):
            ok = exists & ~crossed & (t_cp < ct) & (d_cpa < dh) & (t_cpa < tt)
        if np.any(ok):
            return True
    return False


def pair_features(sa, sb, fix: Optional[GeoPoint], intruder: str) -> NeighborFeatures:
    """Features of intruder b seen from ownship a, from nominal projections."""
    own = GeoPoint(sa[0], sa[1], sa[2])
    plane = TangentPlane.between(own, GeoPoint(sb[0], sb[1]))
    pax, pay = plane.forward(sa[0], sa[1])
    pbx, pby = plane.forward(sb[0], sb[1])
    vax, vay = TangentPlane.velocity(sa[3], sa[4])
    vbx, vby = TangentPlane.velocity(sb[3], sb[4])
    t_cpa, d_h = cpa_planar(pax, pay, vax, vay, pbx, pby, vbx, vby)
    d_v = abs((sb[2] - sa[2]) + t_cpa * (sb[5] - sa[5]) / 60.0)
    exists, crossed, t_cp, d_cp, _, _ = crossing_planar(pax, pay, vax, vay, pbx, pby, vbx, vby)
    if not bool(exists) or bool(crossed):
        t_cp, d_cp = 0.0, 0.0
    if fix is not None:
        d_f = horizontal_distance(own, fix)
        b_f = math.radians(initial_bearing(own, fix) - sa[3]) if d_f > 0 else 0.0
    else:
        d_f, b_f = 0.0, 0.0
    a = math.radians(sb[3] - sa[3])
    # bearing of the ownship from the intruder's CPA position, relative to the intruder's course
    ox, oy = pax + vax * t_cpa, pay + vay * t_cpa
    ix, iy = pbx + vbx * t_cpa, pby + vby * t_cpa
    if math.hypot(ox - ix, oy - iy) > 0:
        b = math.atan2(ox - ix, oy - iy) - math.radians(sb[3])
    else:
        b = 0.0
    return NeighborFeatures(intruder, math.sin(b_f), math.cos(b_f), d_f, float(d_h), float(d_v), float(t_cpa),
                            float(d_cp), float(t_cp), math.sin(a), math.cos(a), math.sin(b), math.cos(b))


class ConflictDetector:
    """Memoised CR evaluation over a grid; pair results are shared by both flights."""

    def __init__(self, grid: GridIndex, stats: DeviationStats, config: DetectConfig):
        self.grid = grid
        self.stats = stats
        self.config = config
        self.deltas = fan_deltas(stats)
        self._cache: Dict[Tuple[int, int, int], bool] = {}

    def conflict(self, k: int, i: int, m: int, j: int) -> bool:
        trs = self.grid.trajectories
        t = int(trs[k].times[i])
        if int(trs[m].times[j]) != t:
            raise ValueError("points are not co-temporal")
        # canonical order makes the relation exactly symmetric
        if trs[k].id > trs[m].id:
            k, i, m, j = m, j, k, i
        key = (t, k, m)
        hit = self._cache.get(key)
        if hit is None:
            hit = cr_satisfied(_state(trs[k], i), _state(trs[m], j), self.deltas, self.config)
            self._cache[key] = hit
        return hit

    def neighbors(self, k: int, i: int, fix: Optional[GeoPoint] = None) -> List[NeighborFeatures]:
        trs = self.grid.trajectories
        out = []
        for m, j in self.grid.candidates(k, i):
            if self.conflict(k, i, m, j):
                out.append(pair_features(_state(trs[k], i), _state(trs[m], j), fix, trs[m].id))
        out.sort(key=lambda f: (f.t_cpa, f.intruder))
        return out


def neighbors(focal, t: int, grid: GridIndex, stats: DeviationStats, config: DetectConfig,
              fix: Optional[GeoPoint] = None, detector: Optional[ConflictDetector] = None) -> List[NeighborFeatures]:
    """Conflicting intruders of ``focal`` at time ``t``, sorted by t_cpa."""
    k = grid.by_id[focal.id]
    i = focal.index_at(t)
    if i is None:
        raise ValueError(f"{focal.id} has no point at t={t}")
    det = detector or ConflictDetector(grid, stats, config)
    return det.neighbors(k, i, fix)


def exhaustive_conflicts(trajectories: Sequence, stats: DeviationStats, config: DetectConfig):
    """Reference O(F^2) detection without the index: {t: set of frozenset({id_a, id_b})}."""
    deltas = fan_deltas(stats)
    cfg_grid = GridIndex(trajectories, config)
    by_t = defaultdict(list)
    for tr in trajectories:
        for i in range(len(tr)):
            cell = cfg_grid.cell_of(float(tr.lon[i]), float(tr.lat[i]))
            if cell is not None:
                by_t[int(tr.times[i])].append((tr, i, cell))
    out = {}
    d = config.d_th_cells
    for t, pts in by_t.items():
        found = set()
        for x in range(len(pts)):
            for y in range(x + 1, len(pts)):
                (ta, ia, ca), (tb, ib, cb) = pts[x], pts[y]
                if d is not None and (abs(ca[0] - cb[0]) > d or abs(ca[1] - cb[1]) > d):
                    continue
                a, b = (ta, ia), (tb, ib)
                if ta.id > tb.id:
                    a, b = b, a
                if cr_satisfied(_state(*a), _state(*b), deltas, config):
                    found.add(frozenset((ta.id, tb.id)))
        out[t] = found
    return out


# --- fixpoints ---------------------------------------------------------------

def _segment_intersection(p1, p2, q1, q2):
    """Intersection parameter s on p1->p2 with segment q1->q2, or None."""
    rx, ry = p2[0] - p1[0], p2[1] - p1[1]
    sx, sy = q2[0] - q1[0], q2[1] - q1[1]
    den = rx * sy - ry * sx
    if abs(den) < 1e-15:
        return None
    qpx, qpy = q1[0] - p1[0], q1[1] - p1[1]
    s = (qpx * sy - qpy * sx) / den
    u = (qpx * ry - qpy * rx) / den
    if 0.0 <= s <= 1.0 and 0.0 <= u <= 1.0:
        return s
    return None


def sector_exit_point(trajectory, polygon) -> GeoPoint:
    inside = np.array([point_in_polygon(float(lo), float(la), polygon)
                       for lo, la in zip(trajectory.lon, trajectory.lat)])
    exits = np.flatnonzero(inside[:-1] & ~inside[1:])
    if len(exits) == 0:
        raise FixpointError(f"{trajectory.id} never exits the sector")
    i = int(exits[-1])
    p1 = (float(trajectory.lon[i]), float(trajectory.lat[i]))
    p2 = (float(trajectory.lon[i + 1]), float(trajectory.lat[i + 1]))
    best = None
    for k in range(len(polygon)):
        s = _segment_intersection(p1, p2, polygon[k], polygon[(k + 1) % len(polygon)])
        if s is not None and (best is None or s > best):
            best = s
    if best is None:
        raise FixpointError(f"{trajectory.id}: exit crossing not found")
    alt = float(trajectory.alt[i] + best * (trajectory.alt[i + 1] - trajectory.alt[i]))
    return GeoPoint(p1[0] + best * (p2[0] - p1[0]), p1[1] + best * (p2[1] - p1[1]), alt)


def box_edge_fixpoint(origin: Tuple[float, float], dest: Tuple[float, float], bounds) -> GeoPoint:
    """Where the box edge facing the destination meets the origin-destination line."""
    lo_lon, lo_lat, hi_lon, hi_lat = bounds
    ox, oy = origin
    dx, dy = dest[0] - ox, dest[1] - oy
    edges = []
    if dest[0] > hi_lon:
        edges.append(("x", hi_lon))
    if dest[0] < lo_lon:
        edges.append(("x", lo_lon))
    if dest[1] > hi_lat:
        edges.append(("y", hi_lat))
    if dest[1] < lo_lat:
        edges.append(("y", lo_lat))
    if not edges:
        raise FixpointError("destination lies inside the SA box")
    parallel = []
    for axis, value in edges:
        if axis == "x":
            if abs(dx) < 1e-12:
                parallel.append(axis)
                continue
            s = (value - ox) / dx
            x, y = value, oy + s * dy
            if lo_lat <= y <= hi_lat:
                return GeoPoint(x, y)
        else:
            if abs(dy) < 1e-12:
                parallel.append(axis)
                continue
            s = (value - oy) / dy
            x, y = ox + s * dx, value
            if lo_lon <= x <= hi_lon:
                return GeoPoint(x, y)
    if parallel:
        raise FixpointError("origin-destination line is parallel to the edge facing the destination")
    raise FixpointError("origin-destination line misses the edge facing the destination")


def fixpoint(trajectory, config: DetectConfig) -> GeoPoint:
    if config.setting == SECTOR_RELATED:
        return sector_exit_point(trajectory, config.sector_polygon)
    f = trajectory.flight
    try:
        origin, dest = config.airports[f.apt_from], config.airports[f.apt_to]
    except KeyError as exc:
        raise FixpointError(f"no coordinates for airport {exc.args[0]!r}") from None
    return box_edge_fixpoint(origin, dest, config.sa_bounds)


# --- enrichment --------------------------------------------------------------

@dataclass
class EnrichedFlight:
    id: str
    times: np.ndarray
    own: np.ndarray            # (N, 3): h, s_h, s_v
    course: np.ndarray
    conflict: np.ndarray       # (N,) bool
    neighbors: np.ndarray      # (N, K, 13)
    intruders: List[Tuple[str, ...]]
    fixpoint: Optional[GeoPoint] = None
    overflow: int = 0

    def __len__(self):
        return len(self.times)

    def features(self) -> np.ndarray:
        """Flat (N, 3 + 13K) state matrix."""
        return np.concatenate([self.own, self.neighbors.reshape(len(self), -1)], axis=1)


def enrich(focal, grid: GridIndex, stats: DeviationStats, config: DetectConfig,
           fix: Optional[GeoPoint] = None, detector: Optional[ConflictDetector] = None) -> EnrichedFlight:
    """Own-state features, K nearest-t_cpa neighbour blocks and a conflict
    flag for every point of ``focal`` inside the SA."""
    det = detector or ConflictDetector(grid, stats, config)
    k = grid.by_id[focal.id]
    K = config.max_neighbors
    keep = [i for i in range(len(focal)) if (k, i) in grid.point_cell]
    n = len(keep)
    blocks = np.zeros((n, K, len(NEIGHBOR_FIELDS)))
    conflict = np.zeros(n, dtype=bool)
    intruders = []
    overflow = 0
    for row, i in enumerate(keep):
        nb = det.neighbors(k, i, fix)
        conflict[row] = bool(nb)
        if len(nb) > K:
            overflow += 1
        for s, f in enumerate(nb[:K]):
            blocks[row, s] = f.as_row()
        intruders.append(tuple(f.intruder for f in nb))
    idx = np.array(keep, dtype=int)
    own = np.column_stack([focal.alt[idx], focal.h_speed[idx], focal.v_speed[idx]]) if n else np.zeros((0, 3))
    return EnrichedFlight(focal.id, np.asarray(focal.times)[idx], own, np.asarray(focal.course)[idx],
                          conflict, blocks, intruders, fix, overflow)


def enrich_all(trajectories: Sequence, stats: DeviationStats, config: DetectConfig,
               skip_unresolvable_fixpoint: bool = True):
    """Enrich every trajectory. Returns (flights, skipped ids with reasons)."""
    grid = build_grid(trajectories, config)
    det = ConflictDetector(grid, stats, config)
    flights, skipped = [], []
    for tr in grid.trajectories:
        try:
            fix = fixpoint(tr, config)
        except FixpointError as exc:
            if not skip_unresolvable_fixpoint:
                raise
            skipped.append((tr.id, str(exc)))
            continue
        ef = enrich(tr, grid, stats, config, fix, det)
        if len(ef):
            flights.append(ef)
    return flights, skipped


def enriched_header(K: int) -> List[str]:
    cols = ["flight_id", "timestamp", *OWN_FIELDS, "conflict"]
    for s in range(K):
        cols.extend(f"n{s}_{name}" for name in NEIGHBOR_FIELDS)
    return cols + ["course"]


def write_enriched(path, flights: Sequence[EnrichedFlight], K: int):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(enriched_header(K))
        for ef in flights:
            for r in range(len(ef)):
                w.writerow([ef.id, int(ef.times[r]), *(repr(float(v)) for v in ef.own[r]), int(ef.conflict[r]),
                            *(repr(float(v)) for v in ef.neighbors[r].ravel()), repr(float(ef.course[r]))])


def read_enriched(path) -> List[EnrichedFlight]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        nb_cols = [c for c in header if c.startswith("n") and "_" in c and c[1].isdigit()]
        K = len(nb_cols) // len(NEIGHBOR_FIELDS)
        if header != enriched_header(K):
            raise ValueError(f"{path}: unexpected enriched header")
        rows = defaultdict(list)
        order = []
        for row in reader:
            if row[0] not in rows:
                order.append(row[0])
            rows[row[0]].append(row)
    flights = []
    for fid in order:
        rs = rows[fid]
        times = np.array([int(r[1]) for r in rs], dtype=np.int64)
        own = np.array([[float(v) for v in r[2:5]] for r in rs])
        conflict = np.array([r[5] == "1" for r in rs])
        nb = np.array([[float(v) for v in r[6:6 + K * len(NEIGHBOR_FIELDS)]] for r in rs]).reshape(len(rs), K, -1)
        course = np.array([float(r[-1]) for r in rs])
        flights.append(EnrichedFlight(fid, times, own, course, conflict, nb, [()] * len(rs)))
    return flights
