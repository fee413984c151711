"""Synthetic traffic with scripted controller reactions.

Each scenario unit gets its own (flight level, time slot), so flights of
different units never interact. A reaction unit is a flight R that meets
a partner P on a near-collision crossing; a controller event follows
after a reaction delay and R flies a speed change (SPD) or a
direct-to-waypoint dogleg (DCT) after a pilot delay. Some units also give
R an earlier "benign" encounter B: a CR conflict with a larger miss
distance that draws no action. Solo units are a single straight flight.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .confdet import DetectConfig, FixpointError, GridIndex, _state, cr_satisfied, fixpoint
from .confdet import enrich_all
from .evofan import DeviationStats, fan_deltas, fit_deviation_stats
from .labeler import LabelConfig, annotate_modes, finalize, write_labeled
from .geokin import GeoPoint, TangentPlane, destination, horizontal_distance, initial_bearing
from .trajstore import (AtcoEvent, FlightId, Trajectory, attach_kinematics, utc_date, write_events,
                        write_surveillance)

TURN_RATE_DPS = 3.0
ACCEL_KT_PS = 2.0
MAX_CLEAR_LAG_S = 120   # conflict must clear this soon after the commanded change
GRID_S = 5
SECTOR = "SYN"
# wider than any fan fitted on the generated jitter; used for "no conflict" checks
CHECK_STATS = DeviationStats(tuple(np.linspace(-0.6, 0.6, 8)), tuple(np.linspace(-6.0, 6.0, 8)))


class ScenarioError(RuntimeError):
    pass


@dataclass
class ScenarioSpec:
    region: Tuple[float, float, float, float] = (-10.0, 35.0, 4.5, 44.0)
    flight_count: int = 300
    speed_range: Tuple[float, float] = (400.0, 520.0)
    flight_levels: Tuple[int, ...] = tuple(range(300, 410, 10))
    # share of units that are reaction scenarios (the rest are solo flights)
    conflict_pair_fraction: float = 0.85
    # share of reaction units whose reacting flight also has a no-action encounter
    benign_fraction: float = 0.6
    reaction_delay: Tuple[float, float] = (0.0, 120.0)
    pilot_delay: Tuple[float, float] = (5.0, 20.0)
    action_mix: Tuple[float, float] = (0.5, 0.5)  # SPD, DCT
    course_jitter_deg: float = 0.1
    speed_jitter_kt: float = 1.0
    start_time: int = 1_500_012_000
    slot_s: int = 4500
    max_retries: int = 500
    seed: int = 0

    def __post_init__(self):
        for name in ("conflict_pair_fraction", "benign_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.flight_count < 1:
            raise ValueError("flight_count must be positive")
        if len(self.action_mix) != 2 or min(self.action_mix) < 0 or sum(self.action_mix) <= 0:
            raise ValueError("action_mix needs two non-negative weights")
        if not self.flight_levels:
            raise ValueError("flight_levels is empty")
        lo_lon, lo_lat, hi_lon, hi_lat = self.region
        # flights are centred at least 3 deg lon / 2 deg lat inside the box
        if hi_lon - lo_lon <= 6.0 or hi_lat - lo_lat <= 4.0:
            raise ValueError("region must span more than 6 deg of longitude and 4 deg of latitude")
        self.region = tuple(float(v) for v in self.region)
        self.speed_range = tuple(float(v) for v in self.speed_range)
        self.flight_levels = tuple(int(v) for v in self.flight_levels)
        self.reaction_delay = tuple(float(v) for v in self.reaction_delay)
        self.pilot_delay = tuple(float(v) for v in self.pilot_delay)
        self.action_mix = tuple(float(v) for v in self.action_mix)


@dataclass
class ConflictRecord:
    kind: str                 # "reaction" or "benign"
    flight: str               # reacting / own flight id
    partner: str
    t_start: int              # first point with the CR constraints satisfied
    t_event: Optional[int] = None
    code: str = ""
    t_maneuver_start: Optional[int] = None
    t_maneuver_end: Optional[int] = None


@dataclass
class Scenario:
    spec: ScenarioSpec
    trajectories: List[Trajectory]
    events: List[AtcoEvent]
    conflicts: List[ConflictRecord]
    airports: Dict[str, Tuple[float, float]]


# -- flight simulation ----------------------------------------------------------

Guidance = Callable[[float, GeoPoint], Tuple[GeoPoint, float]]


def _turn_toward(course: float, target: float, max_step: float) -> float:
    d = (target - course + 180.0) % 360.0 - 180.0
    return (course + max(-max_step, min(max_step, d))) % 360.0


def fly(start: GeoPoint, t0: int, t1: int, course: float, speed: float, guidance: Guidance,
        rng: Optional[np.random.Generator] = None, course_jitter: float = 0.0, speed_jitter: float = 0.0):
    """Integrate a flight from t0 to t1 and sample it every 5 s.

    ``guidance(t, pos)`` returns (steer-to point, commanded speed); heading
    and speed follow at the standard turn rate and a fixed acceleration.
    Jitter is drawn once per 5 s sample and held over it.
    """
    times = np.arange(t0, t1 + 1, GRID_S, dtype=np.int64)
    lon, lat = np.empty(len(times)), np.empty(len(times))
    pos = start
    for k, t in enumerate(times):
        lon[k], lat[k] = pos.lon, pos.lat
        if k == len(times) - 1:
            break
        jc = rng.normal(0.0, course_jitter) if rng is not None and course_jitter else 0.0
        js = rng.normal(0.0, speed_jitter) if rng is not None and speed_jitter else 0.0
        target, cmd_speed = guidance(float(t), pos)
        want = initial_bearing(pos, target)
        if abs((want - course + 180.0) % 360.0 - 180.0) < 0.5 and cmd_speed == speed:
            # steady flight: one 5 s step
            course = want
            pos = destination(pos, course + jc, (speed + js) * GRID_S / 3600.0, alt=start.alt)
            continue
        for sub in range(GRID_S):
            if sub:
                target, cmd_speed = guidance(float(t + sub), pos)
                want = initial_bearing(pos, target)
            course = _turn_toward(course, want, TURN_RATE_DPS)
            speed += max(-ACCEL_KT_PS, min(ACCEL_KT_PS, cmd_speed - speed))
            pos = destination(pos, course + jc, (speed + js) / 3600.0, alt=start.alt)
    return times, lon, lat


def _trajectory(fid: FlightId, times, lon, lat, alt) -> Trajectory:
    altv = np.full(len(times), float(alt))
    c, h, v = attach_kinematics(times, lon, lat, altv)
    return Trajectory(fid, times, lon, lat, altv, c, h, v, 0)


def straight_guidance(start: GeoPoint, course: float, speed: float) -> Guidance:
    far = destination(start, course, 3000.0)
    return lambda t, pos: (far, speed)


def crossing_pair(crossing: GeoPoint, course_a: float, course_b: float, speed_a: float, speed_b: float,
                  t0: int, t_meet: float, duration: int, alt: float = 35000.0,
                  ids=("XA", "XB")) -> Tuple[Trajectory, Trajectory]:
    """Two straight flights that reach ``crossing`` together after t_meet seconds."""
    out = []
    for cs, course, speed in ((ids[0], course_a, speed_a), (ids[1], course_b, speed_b)):
        start = destination(crossing, course + 180.0, speed * t_meet / 3600.0, alt=alt)
        course0 = initial_bearing(start, crossing)
        times, lon, lat = fly(start, t0, t0 + duration, course0, speed, straight_guidance(start, course0, speed))
        out.append(_trajectory(FlightId(cs, "SY00", "SY08", "2017-07-14"), times, lon, lat, alt))
    return out[0], out[1]


# -- checks ------------------------------------------------------------------------

def pair_conflict_times(a: Trajectory, b: Trajectory, deltas, config: DetectConfig) -> Dict[int, bool]:
    common = np.intersect1d(a.times, b.times)
    ia = {int(t): i for i, t in enumerate(a.times)}
    ib = {int(t): i for i, t in enumerate(b.times)}
    return {int(t): cr_satisfied(_state(a, ia[int(t)]), _state(b, ib[int(t)]), deltas, config) for t in common}


def _inside(tr: Trajectory, region, margin=0.1) -> bool:
    lo_lon, lo_lat, hi_lon, hi_lat = region
    return bool(np.all((tr.lon > lo_lon + margin) & (tr.lon < hi_lon - margin)
                       & (tr.lat > lo_lat + margin) & (tr.lat < hi_lat - margin)))


def _window_ok(a: Trajectory, b: Trajectory, t: int, grid: GridIndex, d_th) -> bool:
    if d_th is None:
        return True
    i, j = int(np.searchsorted(a.times, t)), int(np.searchsorted(b.times, t))
    ca, cb = grid.cell_of(a.lon[i], a.lat[i]), grid.cell_of(b.lon[j], b.lat[j])
    return ca is not None and cb is not None and max(abs(ca[0] - cb[0]), abs(ca[1] - cb[1])) <= d_th


# -- airports ------------------------------------------------------------------------

def make_airports(region, n: int = 16, radius_nm: float = 900.0) -> Dict[str, Tuple[float, float]]:
    lo_lon, lo_lat, hi_lon, hi_lat = region
    centre = GeoPoint((lo_lon + hi_lon) / 2, (lo_lat + hi_lat) / 2)
    out = {}
    for k in range(n):
        p = destination(centre, 360.0 * k / n, radius_nm)
        out[f"SY{k:02d}"] = (p.lon, p.lat)
    return out


def _nearest_airport(pos: GeoPoint, course: float, airports) -> str:
    def off(code):
        b = initial_bearing(pos, GeoPoint(*airports[code]))
        return abs((b - course + 180.0) % 360.0 - 180.0)
    return min(sorted(airports), key=off)


# -- scenario units --------------------------------------------------------------------

class _Unit:
    def __init__(self, spec: ScenarioSpec, rng: np.random.Generator, config: DetectConfig, airports,
                 level: int, t_slot: int, serial: int):
        self.spec, self.rng, self.config, self.airports = spec, rng, config, airports
        self.alt = level * 100.0
        self.t_slot = t_slot
        self.serial = serial
        self.grid = GridIndex([], config)
        self.nominal = fan_deltas(DeviationStats.empty())
        self.wide = fan_deltas(CHECK_STATS)

    def u(self, lo, hi):
        return float(self.rng.uniform(lo, hi))

    def t5(self, t):
        return int(round(t / GRID_S)) * GRID_S

    def speed(self):
        return self.u(*self.spec.speed_range)

    def _fid(self, role: str, first: GeoPoint, last: GeoPoint, course_in: float, course_out: float) -> FlightId:
        apt_to = _nearest_airport(last, course_out, self.airports)
        apt_from = _nearest_airport(first, (course_in + 180.0) % 360.0, self.airports)
        return FlightId(f"SYN{self.serial:04d}{role}", apt_from, apt_to, "")

    def _finish(self, role, times, lon, lat, courses=None) -> Trajectory:
        first, last = GeoPoint(lon[0], lat[0]), GeoPoint(lon[-1], lat[-1])
        if courses is None:
            courses = (initial_bearing(first, GeoPoint(lon[1], lat[1])),
                       initial_bearing(GeoPoint(lon[-2], lat[-2]), last))
        c_in, c_out = courses
        fid = self._fid(role, first, last, c_in, c_out)
        fid = fid._replace(date=utc_date(int(times[0])))
        tr = _trajectory(fid, times, lon, lat, self.alt)
        if not _inside(tr, self.spec.region):
            raise ScenarioError("leaves region")
        try:
            fixpoint(tr, self.config)
        except FixpointError as exc:
            raise ScenarioError(str(exc))
        return tr

    def _jitter(self):
        return dict(rng=self.rng, course_jitter=self.spec.course_jitter_deg, speed_jitter=self.spec.speed_jitter_kt)

    def solo(self):
        lo_lon, lo_lat, hi_lon, hi_lat = self.spec.region
        centre = GeoPoint(self.u(lo_lon + 3, hi_lon - 3), self.u(lo_lat + 2, hi_lat - 2), self.alt)
        course, speed = self.u(0, 360), self.speed()
        dur = self.t5(self.u(1500, 2400))
        start = destination(centre, course + 180.0, speed * dur / 2 / 3600.0, alt=self.alt)
        c0 = initial_bearing(start, centre)
        t0 = self.t_slot + self.t5(self.u(0, 300))
        times, lon, lat = fly(start, t0, t0 + dur, c0, speed, straight_guidance(start, c0, speed), **self._jitter())
        return [self._finish("S", times, lon, lat)], [], []

    def _encounter(self, r_pos_at, r_course_at, r_speed, t_spawn, tau, miss_nm, speed, t_end, role,
                   angle=(20.0, 60.0)):
        """Partner spawning at t_spawn that passes R's nominal crossing
        point tau seconds later, offset laterally by miss_nm."""
        x = r_pos_at(t_spawn + tau)
        side = 1.0 if self.rng.random() < 0.5 else -1.0
        theta = side * self.u(*angle)
        c_r = r_course_at(t_spawn + tau)
        course = (c_r + theta) % 360.0
        # offset perpendicular to the relative velocity, so miss_nm is the CPA distance
        vrx, vry = TangentPlane.velocity(course, speed)
        vox, voy = TangentPlane.velocity(c_r, r_speed)
        rel = math.degrees(math.atan2(vrx - vox, vry - voy))
        x_off = destination(x, rel + 90.0 * (1 if self.rng.random() < 0.5 else -1), miss_nm)
        start = destination(x_off, course + 180.0, speed * tau / 3600.0, alt=self.alt)
        c0 = initial_bearing(start, x_off)
        times, lon, lat = fly(start, t_spawn, t_end, c0, speed, straight_guidance(start, c0, speed), **self._jitter())
        return self._finish(role, times, lon, lat)

    def reaction(self, code: str, benign: bool):
        spec = self.spec
        lo_lon, lo_lat, hi_lon, hi_lat = spec.region
        course, speed = self.u(0, 360), self.speed()
        t0 = self.t_slot + self.t5(self.u(0, 120))
        # timeline of R
        t = t0 + self.t5(self.u(200, 400))
        t_b = None
        if benign:
            t_b = t
            tau_b = self.t5(self.u(300, 600))
            t_b_end = t_b + tau_b + self.t5(self.u(150, 300))
            t = t_b_end
        t_c = t + self.t5(self.u(100, 300))
        # a speed change needs a long run to the crossing to open up the miss distance
        tau = self.t5(self.u(900, 1100) if code == "SPD" else self.u(420, 900))
        t_e = t_c + self.t5(self.u(*spec.reaction_delay))
        t_m = t_e + self.t5(self.u(*spec.pilot_delay))
        t_r_end = t_c + tau + self.t5(self.u(300, 600))
        t_p_end = t_c + tau + self.t5(self.u(200, 400))

        # nominal (pre-maneuver) R path, centred in the region
        centre = GeoPoint(self.u(lo_lon + 3, hi_lon - 3), self.u(lo_lat + 2, hi_lat - 2), self.alt)
        half = speed * (t_r_end - t0) / 2 / 3600.0
        start = destination(centre, course + 180.0, half, alt=self.alt)
        c0 = initial_bearing(start, centre)
        far = destination(start, c0, 3000.0)
        pos_at = lambda tt: destination(start, c0, speed * (tt - t0) / 3600.0, alt=self.alt)
        course_at = lambda tt: initial_bearing(pos_at(tt), far)

        partners, records = [], []
        if benign:
            b = self._encounter(pos_at, course_at, speed, t_b, tau_b, self.u(8.0, 13.0), self.speed(), t_b_end, "B")
            partners.append(b)
        p = self._encounter(pos_at, course_at, speed, t_c, tau, self.u(0.0, 4.0), self.speed(), t_p_end, "P",
                            (15.0, 35.0) if code == "SPD" else (20.0, 60.0))
        partners.append(p)

        if benign:
            # the benign partner only meets the unmaneuvered part of R
            r0 = self._fly_r(start, t0, t_b_end, c0, speed, straight_guidance(start, c0, speed), None)
            cb = pair_conflict_times(r0, b, self.nominal, self.config)
            if not cb.get(t_b) or not _window_ok(r0, b, t_b, self.grid, self.config.d_th_cells):
                raise ScenarioError("benign encounter not detected at spawn")
            if self._min_miss(r0, b) < 6.0:
                raise ScenarioError("benign encounter too close")
        jitter_seed = int(self.rng.integers(2**63))
        failure = "no maneuver option"
        for side in ((None,) if code == "SPD" else (-1.0, 1.0)):
            guidance, t_done = self._maneuver(code, speed, far, t_m, t_c + tau, pos_at, course_at, p, side)
            try:
                r = self._fly_r(start, t0, t_r_end, c0, speed, guidance, jitter_seed, course_at(t_r_end))
            except ScenarioError as exc:
                failure = str(exc)
                continue
            failure, t_done = self._check_reaction(r, p, t_c, t_m, t_done)
            if failure is None:
                break
        else:
            raise ScenarioError(failure)
        if benign:
            if not pair_conflict_times(r, b, self.nominal, self.config).get(t_b):
                raise ScenarioError("benign encounter lost after jitter")
            records.append(ConflictRecord("benign", r.id, b.id, t_b))
        records.append(ConflictRecord("reaction", r.id, p.id, t_c, t_e, code, t_m, t_done))
        ev = AtcoEvent(r.flight.callsign, r.flight.apt_from, r.flight.apt_to, t_e, code, SECTOR)
        return [r, *partners], [ev], records

    def _fly_r(self, start, t0, t1, c0, speed, guidance, jitter_seed, c_out=None):
        jit = {} if jitter_seed is None else dict(rng=np.random.default_rng(jitter_seed),
                                                   course_jitter=self.spec.course_jitter_deg,
                                                   speed_jitter=self.spec.speed_jitter_kt)
        times, lon, lat = fly(start, t0, t1, c0, speed, guidance, **jit)
        # airports follow the filed (unmaneuvered) route
        return self._finish("R", times, lon, lat, None if c_out is None else (c0, c_out))

    def _check_reaction(self, r, p, t_c, t_m, t_turned):
        """Validate against the detector's own constraint check.

        Returns (failure or None, completion time). The maneuver counts as
        complete once the wide-fan check stays clear for good, which must
        happen soon after the commanded change has been flown.
        """
        cp = pair_conflict_times(r, p, self.nominal, self.config)
        if not all(cp.get(tt) for tt in range(t_c, t_m + 1, GRID_S)):
            return "reaction conflict not continuous before the maneuver", None
        if not _window_ok(r, p, t_c, self.grid, self.config.d_th_cells):
            return "partner outside grid window at spawn", None
        after = pair_conflict_times(r, p, self.wide, self.config)
        last = max((tt for tt, v in after.items() if v and tt >= t_m), default=t_m)
        t_done = max(t_turned, last + GRID_S)
        if t_done - t_turned > MAX_CLEAR_LAG_S:
            return "conflict persists after the maneuver", None
        if self._min_miss(r, p, since=t_done) < 15.0:
            return "maneuver does not restore separation", None
        return None, t_done

    @staticmethod
    def _min_miss(a: Trajectory, b: Trajectory, since: Optional[int] = None) -> float:
        common = np.intersect1d(a.times, b.times)
        if since is not None:
            common = common[common >= since]
        ia, ib = np.searchsorted(a.times, common), np.searchsorted(b.times, common)
        return min((horizontal_distance(a.pos(i), b.pos(j)) for i, j in zip(ia, ib)), default=math.inf)

    def _maneuver(self, code, speed, far, t_m, t_cross, pos_at, course_at, partner, side):
        """Guidance for the reacting flight and the time the maneuver is complete."""
        if code == "SPD":
            new_speed = max(speed - self.u(110.0, 140.0), 300.0)
            t_done = t_m + self.t5(abs(new_speed - speed) / ACCEL_KT_PS) + GRID_S
            t_restore = t_cross + self.t5(self.u(120, 240))

            def g(t, pos):
                return far, (new_speed if t_m <= t < t_restore else speed)
            return g, t_done
        # direct-to a waypoint off track, then rejoin the original route;
        # side -1 turns away from the partner, +1 toward it
        here = pos_at(t_m)
        i = min(int(np.searchsorted(partner.times, t_m)), len(partner) - 1)
        rel = initial_bearing(here, partner.pos(i)) - course_at(t_m)
        toward = 1.0 if math.sin(math.radians(rel)) > 0 else -1.0
        psi = side * toward * self.u(45.0, 60.0)
        along = speed * (t_cross - t_m) / 3600.0
        wp = destination(here, course_at(t_m) + psi, max(40.0, along) + self.u(0.0, 20.0))
        rejoin = destination(here, course_at(t_m), along + self.u(40.0, 70.0))
        state = {"leg": 0}

        def g(t, pos):
            if t < t_m:
                return far, speed
            if state["leg"] == 0 and horizontal_distance(pos, wp) < 2.0:
                state["leg"] = 1
            if state["leg"] == 1 and horizontal_distance(pos, rejoin) < 2.0:
                state["leg"] = 2
            return (wp, rejoin, far)[state["leg"]], speed
        t_done = t_m + self.t5(abs(psi) / TURN_RATE_DPS) + 2 * GRID_S
        return g, t_done


def generate(spec: ScenarioSpec, config: Optional[DetectConfig] = None) -> Scenario:
    """Build a scenario deterministically from ``spec.seed``."""
    airports = make_airports(spec.region)
    config = config or DetectConfig(sa_bounds=spec.region, airports=airports)
    if config.airports != airports:
        config = DetectConfig(**{**asdict(config), "airports": airports})
    rng = np.random.default_rng(spec.seed)
    trajs, events, records = [], [], []
    n_levels = len(spec.flight_levels)
    p_spd = spec.action_mix[0] / sum(spec.action_mix)
    unit = 0
    while len(trajs) < spec.flight_count:
        level = spec.flight_levels[unit % n_levels]
        t_slot = spec.start_time + (unit // n_levels) * spec.slot_s
        is_reaction = rng.random() < spec.conflict_pair_fraction
        code = "SPD" if rng.random() < p_spd else "DCT"
        benign = rng.random() < spec.benign_fraction
        if is_reaction and len(trajs) + 2 + benign > spec.flight_count:
            is_reaction = False
        for attempt in range(spec.max_retries):
            u = _Unit(spec, np.random.default_rng([spec.seed, unit, attempt]), config, airports, level, t_slot, unit)
            try:
                out = u.reaction(code, benign) if is_reaction else u.solo()
            except ScenarioError:
                continue
            if max(int(tr.times[-1]) for tr in out[0]) >= t_slot + spec.slot_s:
                continue
            break
        else:
            raise ScenarioError(f"unit {unit}: no feasible geometry after {spec.max_retries} draws")
        trajs.extend(out[0])
        events.extend(out[1])
        records.extend(out[2])
        unit += 1
    return Scenario(spec, trajs, events, records, airports)


def write_airports(path, airports):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["code", "lon_deg", "lat_deg"])
        for code in sorted(airports):
            w.writerow([code, repr(airports[code][0]), repr(airports[code][1])])


def read_airports(path) -> Dict[str, Tuple[float, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        return {row["code"]: (float(row["lon_deg"]), float(row["lat_deg"])) for row in r}


CONFLICT_HEADER = ["kind", "flight", "partner", "t_start", "t_event", "code", "t_maneuver_start", "t_maneuver_end"]


def write_conflicts(path, records: List[ConflictRecord]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CONFLICT_HEADER)
        for c in records:
            w.writerow(["" if v is None else v for v in (c.kind, c.flight, c.partner, c.t_start, c.t_event,
                                                          c.code, c.t_maneuver_start, c.t_maneuver_end)])


def truth_labels(scn: Scenario, config: Optional[DetectConfig] = None, label_config: Optional[LabelConfig] = None,
                 stats: Optional[DeviationStats] = None, K: int = 4):
    """Labelled rows with the RATPs taken from construction (the event
    times) instead of being searched for. Features come from the regular
    enrichment with a fan fitted on the scenario itself."""
    config = config or DetectConfig(sa_bounds=scn.spec.region, airports=scn.airports, max_neighbors=K)
    label_config = label_config or LabelConfig()
    stats = stats or fit_deviation_stats(scn.trajectories)
    flights, _ = enrich_all(scn.trajectories, stats, config)
    ratps: Dict[str, List] = {}
    for c in scn.conflicts:
        if c.kind == "reaction":
            ratps.setdefault(c.flight, []).append((c.t_event, c.code))
    out = []
    for ef in flights:
        own = ratps.get(ef.id, [])
        if label_config.require_action and not own:
            continue
        idx = [(int(np.searchsorted(ef.times, t)), code) for t, code in own]
        out.append(annotate_modes(ef, idx, label_config))
    return finalize(out, label_config.step)


def write_scenario(scn: Scenario, out_dir, labels: bool = True, K: int = 4) -> Dict[str, str]:
    """Surveillance, events, airports and conflict records; with ``labels``
    also the ground-truth label file in the labeler's schema."""
    os.makedirs(out_dir, exist_ok=True)
    names = ["surveillance", "events", "airports", "conflicts"] + (["labels"] if labels else [])
    paths = {name: os.path.join(out_dir, f"{name}.csv") for name in names}
    write_surveillance(paths["surveillance"], scn.trajectories)
    write_events(paths["events"], scn.events)
    write_airports(paths["airports"], scn.airports)
    write_conflicts(paths["conflicts"], scn.conflicts)
    if labels:
        write_labeled(paths["labels"], truth_labels(scn, K=K), K)
    return paths
