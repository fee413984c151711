"""Temporally weighted precision/recall/F1 and critical-miss counting."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .labeler import ACTIONS, MODES

MODE_G1 = frozenset({1})          # C1
ACTION_G1 = frozenset({1, 2})     # A1, A2
MISS_WINDOW_S = 70.0


class InconsistentStream(ValueError):
    pass


@dataclass(frozen=True)
class ScoreParams:
    n: int = 5

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("score n must be >= 1")

    @property
    def sigma(self) -> float:
        return 5.0 * self.n


def score(x, params: ScoreParams = ScoreParams()):
    """Gaussian closeness score of a temporal distance x >= 0 (seconds)."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * (x / params.sigma) ** 2)
    return float(out) if out.ndim == 0 else out


@dataclass
class EvalStream:
    """Truth and prediction labels of one flight, as class indices."""

    flight_id: str
    times: np.ndarray
    truth: np.ndarray
    pred: np.ndarray
    is_actual: np.ndarray
    is_annotated: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        for name in ("truth", "pred", "is_actual", "is_annotated"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{self.flight_id}: {name} length {len(getattr(self, name))} != {n}")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError(f"{self.flight_id}: timestamps not strictly increasing")


@dataclass
class WeightedCounts:
    tp_weighted: float = 0.0
    fp_weighted: float = 0.0
    fn_weighted: float = 0.0
    tn_weighted: float = 0.0
    tp_count: int = 0
    fp_count: int = 0
    fn_count: int = 0
    tn_count: int = 0

    def __add__(self, other: "WeightedCounts") -> "WeightedCounts":
        return WeightedCounts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


def _nearest(times: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Distance from each time to the closest reference time (inf if none)."""
    if len(ref) == 0:
        return np.full(len(times), np.inf)
    return np.abs(times[:, None] - ref[None, :]).min(axis=1)


def accumulate(stream: EvalStream, cls: int, g1=MODE_G1, params: ScoreParams = ScoreParams(),
               unit_weights: bool = False) -> WeightedCounts:
    """Weighted confusion counts of class ``cls`` over one flight.

    ``g1`` holds the class indices that mean "a resolution action is
    assigned"; everything else is the no-action group. With
    ``unit_weights`` every fractional weight is replaced by 1.
    """
    t = np.asarray(stream.times, dtype=float)
    truth, pred = np.asarray(stream.truth), np.asarray(stream.pred)
    g1 = np.array(sorted(g1))
    t_g1, p_g1 = np.isin(truth, g1), np.isin(pred, g1)
    actual = t[np.asarray(stream.is_actual, dtype=bool)]
    any_ratp = t[np.asarray(stream.is_actual, dtype=bool) | np.asarray(stream.is_annotated, dtype=bool)]
    if t_g1.any() and len(actual) == 0:
        raise InconsistentStream(f"{stream.flight_id}: action-group truths but no actual RATP")

    s_actual = score(_nearest(t, actual), params)
    s_any = score(_nearest(t, any_ratp), params)

    fp = (pred == cls) & (truth != cls)
    fn = (truth == cls) & (pred != cls)
    # cross-group errors get a fractional weight, within-group errors weigh 1
    w_fp = np.where(p_g1 & ~t_g1, 1.0 - s_any, np.where(~p_g1 & t_g1, s_actual, 1.0))
    w_fn = np.where(~t_g1 & p_g1, 1.0 - s_any, np.where(t_g1 & ~p_g1, s_actual, 1.0))
    if unit_weights:
        w_fp = w_fn = np.ones(len(t))
    w_fp, w_fn = w_fp[fp], w_fn[fn]

    tp_count = int(np.sum((pred == cls) & (truth == cls)))
    tn_count = int(np.sum((pred != cls) & (truth != cls)))
    return WeightedCounts(
        tp_weighted=tp_count + float(np.sum(1.0 - w_fp)),
        fp_weighted=float(np.sum(w_fp)),
        fn_weighted=float(np.sum(w_fn)),
        tn_weighted=tn_count + float(np.sum(1.0 - w_fn)),
        tp_count=tp_count,
        fp_count=int(fp.sum()),
        fn_count=int(fn.sum()),
        tn_count=tn_count,
    )


def _ratio(num, den) -> float:
    return float(num / den) if den > 0 else 0.0


def wp_wr_wf1(c: WeightedCounts) -> Tuple[float, float, float]:
    wp = _ratio(c.tp_weighted, c.tp_count + c.fp_count)
    wr = _ratio(c.tp_weighted, c.tp_weighted + c.fn_weighted)
    return wp, wr, _ratio(2 * wp * wr, wp + wr)


def standard_prf(c: WeightedCounts) -> Tuple[float, float, float]:
    p = _ratio(c.tp_count, c.tp_count + c.fp_count)
    r = _ratio(c.tp_count, c.tp_count + c.fn_count)
    return p, r, _ratio(2 * p * r, p + r)


def ratp_groups(stream: EvalStream) -> List[np.ndarray]:
    """Times of each resolution action's RATPs: the actual one plus the
    annotated points that precede it (each annotated point goes to the
    nearest actual RATP at or after it)."""
    t = np.asarray(stream.times, dtype=float)
    actual = t[np.asarray(stream.is_actual, dtype=bool)]
    groups = [[a] for a in actual]
    for ta in t[np.asarray(stream.is_annotated, dtype=bool)]:
        later = np.flatnonzero(actual >= ta)
        if len(later):
            groups[later[0]].append(ta)
    return [np.array(g) for g in groups]


def critical_misses(stream: EvalStream, g1=MODE_G1, window: float = MISS_WINDOW_S) -> int:
    """Resolution actions with no action-group prediction at, or within
    ``window`` seconds of, any of their RATPs."""
    t = np.asarray(stream.times, dtype=float)
    hits = t[np.isin(stream.pred, sorted(g1))]
    misses = 0
    for g in ratp_groups(stream):
        if len(hits) == 0 or _nearest(g, hits).min() > window:
            misses += 1
    return misses


def evaluate(streams: Sequence[EvalStream], classes: Sequence[str], g1=MODE_G1,
             params: ScoreParams = ScoreParams()) -> Dict:
    """Per-class weighted and standard metrics, counts pooled over flights."""
    out = {}
    for k, name in enumerate(classes):
        total = WeightedCounts()
        for s in streams:
            total = total + accumulate(s, k, g1, params)
        wp, wr, wf1 = wp_wr_wf1(total)
        p, r, f1 = standard_prf(total)
        out[name] = {"WP": wp, "WR": wr, "WF1": wf1, "P": p, "R": r, "F1": f1,
                     "defined": total.tp_count + total.fp_count + total.fn_count > 0,
                     "counts": asdict(total)}
    actions = sum(len(ratp_groups(s)) for s in streams)
    misses = sum(critical_misses(s, g1) for s in streams)
    return {"classes": out, "resolution_actions": actions, "critical_misses": misses,
            "critical_miss_rate": _ratio(misses, actions)}


def write_report(prefix, report: Dict):
    """``prefix``.json with the full report, ``prefix``.csv one row per class."""
    with open(f"{prefix}.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    with open(f"{prefix}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        cnt = [f.name for f in fields(WeightedCounts)]
        w.writerow(["class", "WP", "WR", "WF1", "P", "R", "F1", "defined", *cnt])
        for name, m in report["classes"].items():
            w.writerow([name, *(f"{m[k]:.6f}" for k in ("WP", "WR", "WF1", "P", "R", "F1")),
                        int(m["defined"]), *(m["counts"][k] for k in cnt)])


def write_score_curve(path, params: ScoreParams = ScoreParams(), x_max: int = 100):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x_s", "score"])
        for x in range(x_max + 1):
            w.writerow([x, f"{score(x, params):.6f}"])


__all__ = ["MODES", "ACTIONS", "MODE_G1", "ACTION_G1", "ScoreParams", "score", "EvalStream",
           "WeightedCounts", "accumulate", "wp_wr_wf1", "standard_prf", "critical_misses",
           "ratp_groups", "evaluate", "write_report", "write_score_curve", "InconsistentStream"]
