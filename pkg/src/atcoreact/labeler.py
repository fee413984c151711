"""Mode and action labelling of enriched flights, subsampling and the
mode-prior report."""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .confdet import EnrichedFlight, NEIGHBOR_FIELDS, enriched_header
from .evofan import wrap_angle

MODES = ("C0", "C1", "C2")
ACTIONS = ("A0", "A1", "A2")
C0, C1, C2 = 0, 1, 2
A0 = 0
CONT_FIELDS = ("d_course", "d_sh", "d_sv", "d_t")
LABEL_COLUMNS = ["mode", "action", *CONT_FIELDS, "is_actual_ratp", "is_annotated_ratp"]
DEFAULT_CODE_MAP = {"SPD": "A1", "DCT": "A2"}


class LabelError(ValueError):
    pass


@dataclass
class LabelConfig:
    augment_window: float = 250.0
    window_duration: float = 70.0
    step: int = 6
    code_map: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_CODE_MAP))
    # keep only flights with at least one located resolution action
    require_action: bool = True

    def __post_init__(self):
        if self.augment_window <= 0 or self.window_duration <= 0:
            raise ValueError("label windows must be positive")
        if int(self.step) != self.step or self.step < 1:
            raise ValueError(f"step must be a positive integer, got {self.step}")
        bad = {c: a for c, a in self.code_map.items() if a not in ACTIONS[1:]}
        if bad:
            raise ValueError(f"code_map targets must be A1/A2: {bad}")

    def action_of(self, code: str) -> int:
        try:
            return ACTIONS.index(self.code_map[code])
        except KeyError:
            raise LabelError(f"unmapped mwm_code {code!r}") from None


@dataclass
class LabeledFlight:
    """Labelled rows of one enriched flight.

    ``rows`` index into ``source``; label arrays are aligned with ``rows``.
    ``cont`` is filled by :func:`continuous_actions`.
    """

    source: EnrichedFlight
    rows: np.ndarray
    mode: np.ndarray
    action: np.ndarray
    is_actual: np.ndarray
    is_annotated: np.ndarray
    cont: Optional[np.ndarray] = None

    @property
    def id(self) -> str:
        return self.source.id

    @property
    def times(self) -> np.ndarray:
        return self.source.times[self.rows]

    @property
    def conflict(self) -> np.ndarray:
        return self.source.conflict[self.rows]

    def __len__(self):
        return len(self.rows)

    def features(self) -> np.ndarray:
        return self.source.features()[self.rows]

    def take(self, keep) -> "LabeledFlight":
        keep = np.asarray(keep)
        return replace(self, rows=self.rows[keep], mode=self.mode[keep], action=self.action[keep],
                       is_actual=self.is_actual[keep], is_annotated=self.is_annotated[keep],
                       cont=None if self.cont is None else self.cont[keep])


def locate_actual_ratp(ef: EnrichedFlight, t_assoc: float, t_event: float,
                       window_duration: float = 70.0) -> Optional[int]:
    """Index of the conflict-bearing point in [t_assoc - window, t_assoc]
    closest in time to the event, or None if there is none."""
    t = ef.times
    cand = np.flatnonzero((t >= t_assoc - window_duration) & (t <= t_assoc) & ef.conflict)
    if len(cand) == 0:
        return None
    # on equal distance prefer the later point
    gap = np.abs(t[cand] - t_event)
    best = np.flatnonzero(gap == gap.min())[-1]
    return int(cand[best])


@dataclass
class LabelReport:
    located: int = 0
    rejected: List[Tuple[str, float]] = field(default_factory=list)
    dropped_flights: List[str] = field(default_factory=list)


def annotate_modes(ef: EnrichedFlight, ratps: Sequence[Tuple[int, str]], config: LabelConfig) -> LabeledFlight:
    """Label every point of ``ef``; ``ratps`` holds (actual RATP index, mwm_code)."""
    n = len(ef)
    mode = np.where(ef.conflict, C2, C0).astype(np.int64)
    action = np.zeros(n, dtype=np.int64)
    actual = np.zeros(n, dtype=bool)
    annotated = np.zeros(n, dtype=bool)
    drop = np.zeros(n, dtype=bool)
    for idx, code in ratps:
        if not ef.conflict[idx]:
            raise LabelError(f"{ef.id}: RATP at t={int(ef.times[idx])} has no conflict")
        t_r = ef.times[idx]
        win = (ef.times >= t_r - config.augment_window) & (ef.times < t_r)
        annotated |= win & ef.conflict
        drop |= win & ~ef.conflict
        actual[idx] = True
        action[idx] = config.action_of(code)
    annotated &= ~actual
    mode[annotated | actual] = C1
    keep = ~drop | actual
    lf = LabeledFlight(ef, np.arange(n), mode, action, actual, annotated)
    return lf.take(keep)


def subsample(lf: LabeledFlight, step: int) -> LabeledFlight:
    """Keep every C1 row and every step-th row of each run of C0/C2 rows."""
    if step < 1:
        raise ValueError("step must be >= 1")
    keep = np.zeros(len(lf), dtype=bool)
    counter = 0
    for r, m in enumerate(lf.mode):
        if m == C1:
            keep[r] = True
            counter = 0
            continue
        keep[r] = counter % step == 0
        counter += 1
    return lf.take(keep)


def continuous_actions(lf: LabeledFlight) -> LabeledFlight:
    """Attach (d_course, d_sh, d_sv, d_t) from each row to the next emitted
    row, using the unsubsampled enriched values. The last row has no
    successor and is dropped."""
    src, r = lf.source, lf.rows
    if len(r) < 2:
        return replace(lf.take(np.zeros(len(r), dtype=bool)), cont=np.empty((0, 4)))
    cur, nxt = r[:-1], r[1:]
    cont = np.column_stack([
        wrap_angle(src.course[nxt] - src.course[cur]),
        src.own[nxt, 1] - src.own[cur, 1],
        src.own[nxt, 2] - src.own[cur, 2],
        (src.times[nxt] - src.times[cur]).astype(float),
    ])
    out = lf.take(np.arange(len(r) - 1))
    out.cont = cont
    return out


def label_flights(flights: Sequence[EnrichedFlight], events: Dict[str, List[Tuple[float, object]]],
                  config: LabelConfig) -> Tuple[List[LabeledFlight], LabelReport]:
    """Locate RATPs and annotate modes (before subsampling).

    ``events`` maps a flight id to (associated point time, AtcoEvent) pairs.
    """
    report = LabelReport()
    out = []
    for ef in flights:
        ratps = []
        for t_assoc, ev in events.get(ef.id, []):
            idx = locate_actual_ratp(ef, t_assoc, ev.timestamp, config.window_duration)
            if idx is None:
                report.rejected.append((ef.id, ev.timestamp))
                continue
            ratps.append((idx, ev.mwm_code))
        if config.require_action and not ratps:
            report.dropped_flights.append(ef.id)
            continue
        report.located += len(ratps)
        out.append(annotate_modes(ef, ratps, config))
    return out, report


def finalize(labeled: Iterable[LabeledFlight], step: int) -> List[LabeledFlight]:
    """Subsample and attach continuous targets: the training rows."""
    return [continuous_actions(subsample(lf, step)) for lf in labeled]


def prior_report(labeled: Sequence[LabeledFlight], steps: Sequence[int]) -> Dict[int, Tuple[float, float, float]]:
    total = sum(len(lf) for lf in labeled)
    if total == 0:
        raise ValueError("prior report of an empty dataset")
    rep = {}
    for s in steps:
        counts = np.zeros(3)
        for lf in labeled:
            counts += np.bincount(subsample(lf, s).mode, minlength=3)
        rep[s] = tuple(float(v) for v in counts / counts.sum())
    return rep


def write_prior_report(path, report: Dict[int, Tuple[float, float, float]]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", *MODES])
        for s, p in report.items():
            w.writerow([s, *(f"{v:.4f}" for v in p)])


def write_labeled(path, labeled: Sequence[LabeledFlight], K: int):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(enriched_header(K) + LABEL_COLUMNS)
        for lf in labeled:
            src = lf.source
            for j, r in enumerate(lf.rows):
                w.writerow([src.id, int(src.times[r]), *(repr(float(v)) for v in src.own[r]), int(src.conflict[r]),
                            *(repr(float(v)) for v in src.neighbors[r].ravel()), repr(float(src.course[r])),
                            MODES[lf.mode[j]], ACTIONS[lf.action[j]],
                            *(repr(float(v)) for v in lf.cont[j]),
                            int(lf.is_actual[j]), int(lf.is_annotated[j])])


def read_labeled(path) -> List[LabeledFlight]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        nf = len(NEIGHBOR_FIELDS)
        K = (len(header) - len(LABEL_COLUMNS) - 7) // nf
        if K < 0 or header != enriched_header(K) + LABEL_COLUMNS:
            raise ValueError(f"{path}: unexpected labelled-dataset header")
        groups = defaultdict(list)
        for row in reader:
            groups[row[0]].append(row)
    out = []
    nb_end = 6 + K * nf
    for fid, rs in groups.items():
        n = len(rs)
        ef = EnrichedFlight(
            fid,
            np.array([int(r[1]) for r in rs], dtype=np.int64),
            np.array([[float(v) for v in r[2:5]] for r in rs]).reshape(n, 3),
            np.array([float(r[nb_end]) for r in rs]),
            np.array([r[5] == "1" for r in rs]),
            np.array([[float(v) for v in r[6:nb_end]] for r in rs]).reshape(n, K, nf),
            [()] * n,
        )
        lab = [r[nb_end + 1:] for r in rs]
        out.append(LabeledFlight(
            ef, np.arange(n),
            np.array([MODES.index(r[0]) for r in lab], dtype=np.int64),
            np.array([ACTIONS.index(r[1]) for r in lab], dtype=np.int64),
            np.array([r[6] == "1" for r in lab]),
            np.array([r[7] == "1" for r in lab]),
            np.array([[float(v) for v in r[2:6]] for r in lab]).reshape(n, 4),
        ))
    return out
