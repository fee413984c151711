"""Per-step course/speed deviation statistics and the candidate-evolution
fans built from them."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .geokin import GeoPoint, Kinematics, TangentPlane

DEFAULT_BINS = 20
DEFAULT_HORIZON_S = 1800.0


@dataclass(frozen=True)
class DeviationStats:
    course_medians: tuple
    speed_medians: tuple

    @property
    def n(self) -> int:
        return len(self.course_medians)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "course_medians": list(self.course_medians),
                           "speed_medians": list(self.speed_medians)}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DeviationStats":
        d = json.loads(text)
        stats = cls(tuple(float(v) for v in d["course_medians"]), tuple(float(v) for v in d["speed_medians"]))
        if stats.n != d["n"] or len(stats.speed_medians) != d["n"]:
            raise ValueError("deviation stats: median count does not match n")
        return stats

    @classmethod
    def empty(cls) -> "DeviationStats":
        return cls((), ())


def equal_frequency_medians(values, n: int) -> np.ndarray:
    """Split sorted values into n bins whose sizes differ by at most one and
    return each bin's median."""
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) < n:
        raise ValueError(f"need at least {n} values, got {len(v)}")
    return np.array([np.median(b) for b in np.array_split(v, n)])


def wrap_angle(deg):
    """Wrap to [-180, 180)."""
    return (np.asarray(deg) + 180.0) % 360.0 - 180.0


def step_deviations(trajectories: Iterable):
    """Pooled per-step course and horizontal-speed differences.

    The first point of each trajectory borrows its kinematics from the
    second, so the 0->1 step carries no information and is skipped.
    """
    dc, ds = [], []
    for tr in trajectories:
        if len(tr) < 3:
            continue
        dc.append(wrap_angle(np.diff(tr.course[1:])))
        ds.append(np.diff(tr.h_speed[1:]))
    if not dc:
        return np.empty(0), np.empty(0)
    return np.concatenate(dc), np.concatenate(ds)


def fit_deviation_stats(trajectories: Iterable, n: int = DEFAULT_BINS) -> DeviationStats:
    dc, ds = step_deviations(trajectories)
    if n == 0:
        return DeviationStats.empty()
    for name, vals in (("course", dc), ("speed", ds)):
        if len(vals) < n:
            raise ValueError(f"insufficient {name} deviations: {len(vals)} values for {n} bins")
    return DeviationStats(tuple(equal_frequency_medians(dc, n)), tuple(equal_frequency_medians(ds, n)))


@dataclass(frozen=True)
class EvolutionFan:
    """Straight-line candidate futures from an anchor point.

    ``courses``/``speeds`` hold one entry per projection; index 0 is the
    nominal (no deviation) projection.
    """

    anchor: GeoPoint
    courses: np.ndarray
    speeds: np.ndarray
    deltas: np.ndarray
    v_speed: float
    horizon: float

    def __len__(self):
        return len(self.courses)

    def velocities(self):
        """Plane velocities in nm/s, shape (k, 2)."""
        vx, vy = TangentPlane.velocity(self.courses, self.speeds)
        return np.column_stack([np.atleast_1d(vx), np.atleast_1d(vy)])

    def displacements(self, t: float) -> np.ndarray:
        """Offsets (nm) from the anchor after t seconds on the anchor's tangent plane."""
        if not 0 <= t <= self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        return self.velocities() * t

    def positions(self, t: float):
        """Geographic positions after t seconds, list of GeoPoint."""
        plane = TangentPlane(self.anchor.lon, self.anchor.lat)
        d = self.displacements(t)
        lon, lat = plane.inverse(d[:, 0], d[:, 1])
        alt = self.anchor.alt + self.v_speed / 60.0 * t
        return [GeoPoint(float(a), float(b), alt) for a, b in zip(np.atleast_1d(lon), np.atleast_1d(lat))]


def fan_deltas(stats: DeviationStats) -> np.ndarray:
    """(n+1)^2 x 2 array of (course, speed) offsets; row 0 is (0, 0)."""
    dc = np.r_[0.0, np.asarray(stats.course_medians, dtype=float)]
    ds = np.r_[0.0, np.asarray(stats.speed_medians, dtype=float)]
    cc, ss = np.meshgrid(dc, ds, indexing="ij")
    return np.column_stack([cc.ravel(), ss.ravel()])


def build_fan(anchor: GeoPoint, kin: Kinematics, stats: DeviationStats,
              horizon: float = DEFAULT_HORIZON_S) -> EvolutionFan:
    deltas = fan_deltas(stats)
    courses = (kin.course + deltas[:, 0]) % 360.0
    # a negative speed deviation cannot reverse the aircraft
    speeds = np.maximum(kin.h_speed + deltas[:, 1], 0.0)
    return EvolutionFan(anchor, courses, speeds, deltas, kin.v_speed, horizon)


def fan_velocities(course: float, h_speed: float, deltas: np.ndarray):
    """Plane velocity components for every fan member, without building the fan object."""
    courses = course + deltas[:, 0]
    speeds = np.maximum(h_speed + deltas[:, 1], 0.0)
    return TangentPlane.velocity(courses, speeds)
