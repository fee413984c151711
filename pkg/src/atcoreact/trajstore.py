"""Trajectory and ATCO event data model, CSV ingestion, 5 s resampling and
event-to-trajectory association."""
from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence

import numpy as np

from .geokin import GeoPoint, Kinematics, estimate_kinematics

log = logging.getLogger(__name__)

GRID_S = 5
MAX_GAP_S = 60

SURVEILLANCE_HEADER = ["callsign", "apt_from", "apt_to", "lon_deg", "lat_deg", "alt_ft", "timestamp_s"]
EVENT_HEADER = ["callsign", "apt_from", "apt_to", "mwm_code", "time_annotation_s", "sector"]


class IngestError(ValueError):
    pass


class FlightId(NamedTuple):
    callsign: str
    apt_from: str
    apt_to: str
    date: str

    def key(self) -> str:
        return f"{self.callsign}_{self.apt_from}_{self.apt_to}_{self.date}"


@dataclass(frozen=True)
class RawTrackPoint:
    callsign: str
    apt_from: str
    apt_to: str
    pos: GeoPoint
    timestamp: int

    def __post_init__(self):
        if not self.callsign:
            raise ValueError("empty callsign")
        if not math.isfinite(self.timestamp):
            raise ValueError("timestamp not finite")


@dataclass(frozen=True)
class AtcoEvent:
    callsign: str
    apt_from: str
    apt_to: str
    timestamp: int
    mwm_code: str
    sector: str = ""


@dataclass
class Trajectory:
    """A resampled flight segment on the 5 s grid, stored column-wise."""

    flight: FlightId
    times: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    alt: np.ndarray
    course: np.ndarray
    h_speed: np.ndarray
    v_speed: np.ndarray
    segment: int = 0

    @property
    def id(self) -> str:
        base = self.flight.key()
        return base if self.segment == 0 else f"{base}#{self.segment}"

    def __len__(self):
        return len(self.times)

    def pos(self, i: int) -> GeoPoint:
        return GeoPoint(float(self.lon[i]), float(self.lat[i]), float(self.alt[i]))

    def kin(self, i: int) -> Kinematics:
        return Kinematics(float(self.course[i]), float(self.h_speed[i]), float(self.v_speed[i]))

    def index_at(self, t: int) -> Optional[int]:
        if len(self.times) == 0 or t < self.times[0] or t > self.times[-1]:
            return None
        i = (t - int(self.times[0])) // GRID_S
        if (t - int(self.times[0])) % GRID_S:
            return None
        return int(i)

    def slice(self, start: int, stop: int, segment: Optional[int] = None) -> "Trajectory":
        return Trajectory(self.flight, self.times[start:stop], self.lon[start:stop], self.lat[start:stop],
                          self.alt[start:stop], self.course[start:stop], self.h_speed[start:stop],
                          self.v_speed[start:stop], self.segment if segment is None else segment)


@dataclass
class IngestReport:
    flights: Dict[FlightId, List[RawTrackPoint]] = field(default_factory=dict)
    errors: List[tuple] = field(default_factory=list)
    rejected_range: int = 0
    duplicates: int = 0


@dataclass(frozen=True)
class Association:
    event: AtcoEvent
    trajectory_id: str
    point_index: int


@dataclass
class AssociationReport:
    associations: List[Association] = field(default_factory=list)
    unassociated: List[AtcoEvent] = field(default_factory=list)
    ambiguous: List[AtcoEvent] = field(default_factory=list)


def utc_date(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%d")


def _check_header(reader, expected, path):
    header = next(reader, None)
    if header is None:
        return False
    if [h.strip() for h in header] != expected:
        raise IngestError(f"{path}: unexpected header {header!r}, expected {expected!r}")
    return True


def ingest_surveillance(path, strict: bool = False) -> IngestReport:
    """Parse a surveillance CSV and group rows into time-sorted flights.

    Malformed rows are collected in ``report.errors`` as ``(line, message)``
    (or raised when ``strict``). Out-of-range coordinates are rejected and
    counted. A repeated timestamp within a flight keeps the first row.
    """
    report = IngestReport()
    groups: Dict[FlightId, Dict[int, RawTrackPoint]] = defaultdict(dict)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if not _check_header(reader, SURVEILLANCE_HEADER, path):
            return report
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != len(SURVEILLANCE_HEADER):
                    raise ValueError(f"expected {len(SURVEILLANCE_HEADER)} fields, got {len(row)}")
                callsign, apt_from, apt_to = row[0].strip(), row[1].strip(), row[2].strip()
                if not callsign:
                    raise ValueError("empty callsign")
                lon, lat, alt = float(row[3]), float(row[4]), float(row[5])
                ts = int(row[6])
            except ValueError as exc:
                if strict:
                    raise IngestError(f"{path}:{line}: {exc}") from exc
                report.errors.append((line, str(exc)))
                continue
            if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0) or not math.isfinite(alt):
                report.rejected_range += 1
                continue
            fid = FlightId(callsign, apt_from, apt_to, utc_date(ts))
            if ts in groups[fid]:
                report.duplicates += 1
                continue
            groups[fid][ts] = RawTrackPoint(callsign, apt_from, apt_to, GeoPoint(lon, lat, alt), ts)
    for fid in sorted(groups):
        report.flights[fid] = [groups[fid][t] for t in sorted(groups[fid])]
    if report.duplicates:
        log.warning("%s: dropped %d duplicate timestamps", path, report.duplicates)
    if report.rejected_range:
        log.warning("%s: rejected %d rows with out-of-range coordinates", path, report.rejected_range)
    return report


def ingest_events(path, strict: bool = False):
    """Parse an event CSV. Returns ``(events, errors)``."""
    events, errors = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if not _check_header(reader, EVENT_HEADER, path):
            return events, errors
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != len(EVENT_HEADER):
                    raise ValueError(f"expected {len(EVENT_HEADER)} fields, got {len(row)}")
                if not row[0].strip():
                    raise ValueError("empty callsign")
                events.append(AtcoEvent(row[0].strip(), row[1].strip(), row[2].strip(), int(row[4]),
                                        row[3].strip(), row[5].strip()))
            except ValueError as exc:
                if strict:
                    raise IngestError(f"{path}:{line}: {exc}") from exc
                errors.append((line, str(exc)))
    return events, errors


def attach_kinematics(times, lon, lat, alt):
    """Course/speed arrays for a sampled path; the first point borrows from its successor."""
    n = len(times)
    course = np.zeros(n)
    h_speed = np.zeros(n)
    v_speed = np.zeros(n)
    prev_course = None
    for i in range(1, n):
        k = estimate_kinematics(GeoPoint(lon[i - 1], lat[i - 1], alt[i - 1]), times[i - 1],
                                GeoPoint(lon[i], lat[i], alt[i]), times[i], prev_course)
        course[i], h_speed[i], v_speed[i] = k.course, k.h_speed, k.v_speed
        prev_course = k.course
    if n > 1:
        course[0], h_speed[0], v_speed[0] = course[1], h_speed[1], v_speed[1]
    return course, h_speed, v_speed


def resample_5s(raw: Sequence[RawTrackPoint], max_gap: int = MAX_GAP_S) -> List[Trajectory]:
    """Interpolate a raw flight onto every multiple of 5 s it spans.

    Raw gaps longer than ``max_gap`` split the flight into separately
    resampled segments; segments with fewer than two grid points are dropped.
    """
    if len(raw) < 2:
        raise ValueError("at least two raw points are needed to resample")
    p0 = raw[0]
    fid = FlightId(p0.callsign, p0.apt_from, p0.apt_to, utc_date(p0.timestamp))
    ts = np.array([p.timestamp for p in raw], dtype=np.int64)
    if np.any(np.diff(ts) <= 0):
        raise ValueError("raw timestamps must be strictly increasing")
    lon = np.array([p.pos.lon for p in raw])
    lat = np.array([p.pos.lat for p in raw])
    alt = np.array([p.pos.alt for p in raw])

    breaks = np.flatnonzero(np.diff(ts) > max_gap) + 1
    bounds = zip(np.r_[0, breaks], np.r_[breaks, len(ts)])
    out = []
    for a, b in bounds:
        if b - a < 2:
            continue
        start = -(-int(ts[a]) // GRID_S) * GRID_S
        stop = (int(ts[b - 1]) // GRID_S) * GRID_S
        if stop - start < GRID_S:
            continue
        grid = np.arange(start, stop + 1, GRID_S, dtype=np.int64)
        seg = ts[a:b]
        glon = np.interp(grid, seg, lon[a:b])
        glat = np.interp(grid, seg, lat[a:b])
        galt = np.interp(grid, seg, alt[a:b])
        course, hs, vs = attach_kinematics(grid, glon, glat, galt)
        out.append(Trajectory(fid, grid, glon, glat, galt, course, hs, vs, segment=len(out)))
    return out


def build_trajectories(report: IngestReport, max_gap: int = MAX_GAP_S) -> List[Trajectory]:
    trajs = []
    for fid, raw in report.flights.items():
        if len(raw) < 2:
            log.warning("flight %s has a single point, skipped", fid.key())
            continue
        trajs.extend(resample_5s(raw, max_gap))
    return trajs


def level_segments(traj: Trajectory, max_vs: float = 500.0, min_duration: int = 120) -> List[Trajectory]:
    """Maximal sub-trajectories with |v_speed| < max_vs lasting at least min_duration s."""
    level = np.abs(traj.v_speed) < max_vs
    out = []
    i, n = 0, len(traj)
    while i < n:
        if not level[i]:
            i += 1
            continue
        j = i
        while j < n and level[j]:
            j += 1
        if traj.times[j - 1] - traj.times[i] >= min_duration:
            out.append(traj.slice(i, j, segment=traj.segment * 100 + len(out)))
        i = j
    return out


def write_surveillance(path, trajectories: Iterable[Trajectory]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SURVEILLANCE_HEADER)
        for tr in trajectories:
            f = tr.flight
            for i in range(len(tr)):
                w.writerow([f.callsign, f.apt_from, f.apt_to, repr(float(tr.lon[i])), repr(float(tr.lat[i])),
                            repr(float(tr.alt[i])), int(tr.times[i])])


def write_events(path, events: Iterable[AtcoEvent]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_HEADER)
        for e in events:
            w.writerow([e.callsign, e.apt_from, e.apt_to, e.mwm_code, int(e.timestamp), e.sector])


def associate_events(events: Iterable[AtcoEvent], trajectories: Sequence[Trajectory]) -> AssociationReport:
    """Match each event to the single trajectory with equal callsign and
    airports whose time span covers it, then to its temporally closest point
    (ties go to the earlier point)."""
    by_key = defaultdict(list)
    for tr in trajectories:
        by_key[(tr.flight.callsign, tr.flight.apt_from, tr.flight.apt_to)].append(tr)
    report = AssociationReport()
    for ev in events:
        cands = [tr for tr in by_key.get((ev.callsign, ev.apt_from, ev.apt_to), [])
                 if len(tr) and tr.times[0] <= ev.timestamp <= tr.times[-1]]
        if not cands:
            report.unassociated.append(ev)
            continue
        if len(cands) > 1:
            log.warning("event %s at %s matches %d trajectories, skipped", ev.callsign, ev.timestamp, len(cands))
            report.ambiguous.append(ev)
            continue
        tr = cands[0]
        j = int(np.searchsorted(tr.times, ev.timestamp, side="left"))
        if j == len(tr.times):
            idx = j - 1
        elif j == 0 or tr.times[j] == ev.timestamp:
            idx = j
        else:
            before, after = ev.timestamp - tr.times[j - 1], tr.times[j] - ev.timestamp
            idx = j - 1 if before <= after else j
        report.associations.append(Association(ev, tr.id, idx))
    return report
