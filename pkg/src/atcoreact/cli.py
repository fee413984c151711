"""Command-line pipeline: synth | ingest | enrich | label | train | predict | evaluate | report.

Stages talk only through files. Every stage writes the effective
configuration (defaults merged with the config file and flags) to
``config.ini`` in its output directory.

Exit codes: 0 success, 1 stage failure (message names the stage and the
failing record or path), 2 configuration error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from typing import Dict, List, Optional

import numpy as np
from scipy import stats as sps

from . import confdet, evofan, labeler, reactmodel, synthgen, trajstore, wmetrics

log = logging.getLogger("atcoreact")

# -- configuration -------------------------------------------------------------

DEFAULTS: Dict[str, Dict[str, str]] = {
    "paths": {"airports": ""},
    "ingest": {"max_gap_s": str(trajstore.MAX_GAP_S), "strict": "false"},
    "detect": {
        "setting": confdet.SECTOR_IGNORANT,
        "sa_bounds": "-10.0, 35.0, 4.5, 44.0",
        "sector_polygon": "",
        "cell_size": "0.5",
        "d_th_cells": "5",
        "ct_th_min": "20.0",
        "cpa_d_h_th_nm": "15.0",
        "cpa_t_th_min": "30.0",
        "d_v_th_low_ft": "1000.0",
        "d_v_th_high_ft": "2000.0",
        "d_v_switch_ft": "41000.0",
        "max_neighbors": "4",
        "fan_bins": str(evofan.DEFAULT_BINS),
    },
    "label": {
        "augment_window": "250.0",
        "window_duration": "70.0",
        "step": "6",
        "code_map": "SPD:A1, DCT:A2",
        "require_action": "true",
        "prior_steps": "1, 2, 4, 6, 8, 10",
    },
    "model": {
        "kinds": "vae, encoder",
        "lstm_layers": "2",
        "lstm_units": "64",
        "gumbel_temperature": "1.0",
        "learning_rate": "0.005",
        "epochs": "40",
        "batch_size": "64",
        "seed": "0",
        "loss_weights": "1.0, 1.0, 1.0",
        "folds": "5",
        "repeats": "1",
    },
    "score": {"n": "5", "miss_window_s": str(wmetrics.MISS_WINDOW_S)},
    "synth": {
        "region": "-10.0, 35.0, 4.5, 44.0",
        "flight_count": "300",
        "speed_min_kt": "400.0",
        "speed_max_kt": "520.0",
        "flight_levels": ", ".join(str(v) for v in range(300, 410, 10)),
        "conflict_pair_fraction": "0.85",
        "benign_fraction": "0.6",
        "reaction_delay_s": "0, 120",
        "pilot_delay_s": "5, 20",
        "action_mix": "0.5, 0.5",
        "seed": "0",
    },
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str, record: Optional[str] = None):
        self.stage, self.record = stage, record
        super().__init__(message)

    def __str__(self):
        where = f" [record {self.record}]" if self.record else ""
        return f"stage {self.stage}{where}: {self.args[0]}"


def load_config(path: Optional[str]) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_dict(DEFAULTS)
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        user = configparser.ConfigParser(interpolation=None)
        try:
            user.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in user.sections():
            if section not in DEFAULTS:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, value in user[section].items():
                if key not in DEFAULTS[section]:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                cp[section][key] = value
    return cp


def _floats(cp, section, key, n=None) -> tuple:
    raw = cp[section][key]
    try:
        vals = tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected numbers, got {raw!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"[{section}] {key}: expected {n} values, got {len(vals)}")
    return vals


def _get(cp, section, key, kind):
    try:
        if kind is bool:
            return cp.getboolean(section, key)
        return kind(cp[section][key])
    except ValueError:
        raise ConfigError(f"[{section}] {key}: invalid {kind.__name__} {cp[section][key]!r}") from None


def _polygon(text: str):
    if not text.strip():
        return None
    try:
        pts = [tuple(float(v) for v in p.split()) for p in text.split(";") if p.strip()]
    except ValueError:
        raise ConfigError(f"[detect] sector_polygon: expected 'lon lat; lon lat; ...', got {text!r}") from None
    if any(len(p) != 2 for p in pts):
        raise ConfigError("[detect] sector_polygon: each vertex needs lon and lat")
    return pts


def detect_config(cp, airports) -> confdet.DetectConfig:
    d = cp["detect"]
    cells = d["d_th_cells"].strip().lower()
    try:
        return confdet.DetectConfig(
            setting=d["setting"].strip(),
            sa_bounds=_floats(cp, "detect", "sa_bounds", 4),
            sector_polygon=_polygon(d["sector_polygon"]),
            cell_size=_get(cp, "detect", "cell_size", float),
            d_th_cells=None if cells in ("", "none") else _get(cp, "detect", "d_th_cells", int),
            ct_th_min=_get(cp, "detect", "ct_th_min", float),
            cpa_d_h_th_nm=_get(cp, "detect", "cpa_d_h_th_nm", float),
            cpa_t_th_min=_get(cp, "detect", "cpa_t_th_min", float),
            d_v_th_low_ft=_get(cp, "detect", "d_v_th_low_ft", float),
            d_v_th_high_ft=_get(cp, "detect", "d_v_th_high_ft", float),
            d_v_switch_ft=_get(cp, "detect", "d_v_switch_ft", float),
            max_neighbors=_get(cp, "detect", "max_neighbors", int),
            airports=airports,
        )
    except ValueError as exc:
        raise ConfigError(f"[detect] {exc}") from None


def label_config(cp) -> labeler.LabelConfig:
    code_map = {}
    for item in cp["label"]["code_map"].split(","):
        if not item.strip():
            continue
        code, sep, action = item.partition(":")
        if not sep:
            raise ConfigError(f"[label] code_map: expected CODE:ACTION items, got {item.strip()!r}")
        code_map[code.strip()] = action.strip()
    try:
        return labeler.LabelConfig(
            augment_window=_get(cp, "label", "augment_window", float),
            window_duration=_get(cp, "label", "window_duration", float),
            step=_get(cp, "label", "step", int),
            code_map=code_map,
            require_action=_get(cp, "label", "require_action", bool),
        )
    except ValueError as exc:
        raise ConfigError(f"[label] {exc}") from None


def model_config(cp) -> reactmodel.ModelConfig:
    try:
        return reactmodel.ModelConfig(
            lstm_layers=_get(cp, "model", "lstm_layers", int),
            lstm_units=_get(cp, "model", "lstm_units", int),
            gumbel_temperature=_get(cp, "model", "gumbel_temperature", float),
            learning_rate=_get(cp, "model", "learning_rate", float),
            epochs=_get(cp, "model", "epochs", int),
            batch_size=_get(cp, "model", "batch_size", int),
            seed=_get(cp, "model", "seed", int),
            loss_weights=_floats(cp, "model", "loss_weights", 3),
        )
    except ValueError as exc:
        raise ConfigError(f"[model] {exc}") from None


def model_kinds(cp) -> List[str]:
    kinds = [k.strip() for k in cp["model"]["kinds"].split(",") if k.strip()]
    bad = [k for k in kinds if k not in (reactmodel.VAE, reactmodel.ENCODER)]
    if not kinds or bad:
        raise ConfigError(f"[model] kinds: expected vae and/or encoder, got {cp['model']['kinds']!r}")
    return kinds


def score_params(cp) -> wmetrics.ScoreParams:
    try:
        return wmetrics.ScoreParams(n=_get(cp, "score", "n", int))
    except ValueError as exc:
        raise ConfigError(f"[score] {exc}") from None


def scenario_spec(cp) -> synthgen.ScenarioSpec:
    try:
        return synthgen.ScenarioSpec(
            region=_floats(cp, "synth", "region", 4),
            flight_count=_get(cp, "synth", "flight_count", int),
            speed_range=(_get(cp, "synth", "speed_min_kt", float), _get(cp, "synth", "speed_max_kt", float)),
            flight_levels=tuple(int(v) for v in _floats(cp, "synth", "flight_levels")),
            conflict_pair_fraction=_get(cp, "synth", "conflict_pair_fraction", float),
            benign_fraction=_get(cp, "synth", "benign_fraction", float),
            reaction_delay=_floats(cp, "synth", "reaction_delay_s", 2),
            pilot_delay=_floats(cp, "synth", "pilot_delay_s", 2),
            action_mix=_floats(cp, "synth", "action_mix", 2),
            seed=_get(cp, "synth", "seed", int),
        )
    except ValueError as exc:
        raise ConfigError(f"[synth] {exc}") from None


def validate(cp):
    """Build every typed config once so errors surface before any work."""
    detect_config(cp, {})
    label_config(cp)
    model_config(cp)
    model_kinds(cp)
    score_params(cp)
    scenario_spec(cp)
    _get(cp, "ingest", "max_gap_s", int)
    _get(cp, "ingest", "strict", bool)
    _get(cp, "detect", "fan_bins", int)
    _get(cp, "score", "miss_window_s", float)
    [int(v) for v in _floats(cp, "label", "prior_steps")]


def write_effective_config(cp, out_dir):
    with open(os.path.join(out_dir, "config.ini"), "w", encoding="utf-8") as fh:
        cp.write(fh)


# -- helpers ----------------------------------------------------------------------

def _need(stage, *paths):
    for p in paths:
        if not p or not os.path.isfile(p):
            raise StageError(stage, f"missing input file: {p}", p)


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _airports(cp, stage, override=None):
    path = override or cp["paths"]["airports"]
    if not path:
        return {}
    _need(stage, path)
    return synthgen.read_airports(path)


def _read_features(path):
    """Labelled rows if the file carries labels, else enriched rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if header[-len(labeler.LABEL_COLUMNS):] == labeler.LABEL_COLUMNS:
        return [(lf.id, lf.times, lf.features()) for lf in labeler.read_labeled(path)]
    return [(ef.id, ef.times, ef.features()) for ef in confdet.read_enriched(path)]


ASSOC_HEADER = ["flight_id", "point_index", "point_timestamp", *trajstore.EVENT_HEADER]


# -- stages -------------------------------------------------------------------------

def cmd_synth(args, cp):
    spec = scenario_spec(cp)
    try:
        scn = synthgen.generate(spec)
    except synthgen.ScenarioError as exc:
        raise StageError("synth", str(exc)) from None
    paths = synthgen.write_scenario(scn, args.out, labels=False)
    config = detect_config(cp, scn.airports)
    stats = evofan.fit_deviation_stats(scn.trajectories, _get(cp, "detect", "fan_bins", int))
    truth = synthgen.truth_labels(scn, config, label_config(cp), stats, config.max_neighbors)
    labeler.write_labeled(os.path.join(args.out, "labels.csv"), truth, config.max_neighbors)
    log.info("synth: %d flights, %d events -> %s", len(scn.trajectories), len(scn.events), paths["surveillance"])


def cmd_ingest(args, cp):
    _need("ingest", args.surveillance, args.events)
    strict = _get(cp, "ingest", "strict", bool)
    try:
        rep = trajstore.ingest_surveillance(args.surveillance, strict=strict)
        events, ev_errors = trajstore.ingest_events(args.events, strict=strict)
    except trajstore.IngestError as exc:
        raise StageError("ingest", str(exc), str(exc).split(": ")[0]) from None
    trajs = trajstore.build_trajectories(rep, _get(cp, "ingest", "max_gap_s", int))
    assoc = trajstore.associate_events(events, trajs)
    trajstore.write_surveillance(os.path.join(args.out, "trajectories.csv"), trajs)
    with open(os.path.join(args.out, "associations.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ASSOC_HEADER)
        by_id = {tr.id: tr for tr in trajs}
        for a in assoc.associations:
            e = a.event
            w.writerow([a.trajectory_id, a.point_index, int(by_id[a.trajectory_id].times[a.point_index]),
                        e.callsign, e.apt_from, e.apt_to, e.mwm_code, e.timestamp, e.sector])
    _dump_json(os.path.join(args.out, "ingest_report.json"), {
        "flights": len(rep.flights), "trajectories": len(trajs), "surveillance_errors": rep.errors,
        "rejected_range": rep.rejected_range, "duplicates": rep.duplicates, "events": len(events),
        "event_errors": ev_errors, "associated": len(assoc.associations),
        "unassociated": [asdict(e) for e in assoc.unassociated],
        "ambiguous": [asdict(e) for e in assoc.ambiguous]})


def _read_trajectories(stage, path, cp):
    _need(stage, path)
    try:
        rep = trajstore.ingest_surveillance(path, strict=True)
    except trajstore.IngestError as exc:
        raise StageError(stage, str(exc), str(exc).split(": ")[0]) from None
    return trajstore.build_trajectories(rep, _get(cp, "ingest", "max_gap_s", int))


def cmd_enrich(args, cp):
    trajs = _read_trajectories("enrich", args.trajectories, cp)
    config = detect_config(cp, _airports(cp, "enrich", args.airports))
    if args.stats:
        _need("enrich", args.stats)
        with open(args.stats, encoding="utf-8") as fh:
            stats = evofan.DeviationStats.from_json(fh.read())
    else:
        try:
            stats = evofan.fit_deviation_stats(trajs, _get(cp, "detect", "fan_bins", int))
        except ValueError as exc:
            raise StageError("enrich", f"fitting deviation stats: {exc}") from None
    with open(os.path.join(args.out, "deviation_stats.json"), "w", encoding="utf-8") as fh:
        fh.write(stats.to_json() + "\n")
    flights, skipped = confdet.enrich_all(trajs, stats, config)
    confdet.write_enriched(os.path.join(args.out, "enriched.csv"), flights, config.max_neighbors)
    _dump_json(os.path.join(args.out, "enrich_report.json"), {
        "flights": len(flights), "points": int(sum(len(ef) for ef in flights)),
        "conflict_points": int(sum(ef.conflict.sum() for ef in flights)),
        "neighbor_overflow_points": int(sum(ef.overflow for ef in flights)),
        "skipped": [{"flight": fid, "reason": why} for fid, why in skipped]})


def _read_associations(stage, path) -> Dict[str, list]:
    _need(stage, path)
    out: Dict[str, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ASSOC_HEADER:
            raise StageError(stage, "unexpected associations header", path)
        for line, r in enumerate(reader, start=2):
            try:
                ev = trajstore.AtcoEvent(r[3], r[4], r[5], int(r[7]), r[6], r[8])
                out.setdefault(r[0], []).append((float(r[2]), ev))
            except (IndexError, ValueError) as exc:
                raise StageError(stage, f"bad association row: {exc}", f"{path}:{line}") from None
    return out


def cmd_label(args, cp):
    _need("label", args.enriched)
    events = _read_associations("label", args.associations)
    lc = label_config(cp)
    try:
        flights = confdet.read_enriched(args.enriched)
        labeled, rep = labeler.label_flights(flights, events, lc)
    except (labeler.LabelError, ValueError) as exc:
        raise StageError("label", str(exc)) from None
    K = flights[0].neighbors.shape[1] if flights else _get(cp, "detect", "max_neighbors", int)
    final = labeler.finalize(labeled, lc.step)
    labeler.write_labeled(os.path.join(args.out, "labels.csv"), final, K)
    if labeled:
        steps = [int(v) for v in _floats(cp, "label", "prior_steps")]
        labeler.write_prior_report(os.path.join(args.out, "prior_report.csv"), labeler.prior_report(labeled, steps))
    _dump_json(os.path.join(args.out, "label_report.json"), {
        "flights": len(final), "rows": int(sum(len(lf) for lf in final)), "located": rep.located,
        "rejected": [{"flight": f, "event_time": t} for f, t in rep.rejected],
        "dropped_flights": rep.dropped_flights})


def _read_labels(stage, path):
    _need(stage, path)
    try:
        return labeler.read_labeled(path)
    except (ValueError, IndexError) as exc:
        raise StageError(stage, str(exc), path) from None


def _cv_summary(rows) -> List[dict]:
    out = []
    for r in rows:
        item = {"repeat": r["repeat"], "fold": r["fold"], "kind": r["kind"],
                "critical_misses": r["critical_misses"], "resolution_actions": r["resolution_actions"],
                "final_loss": r["final_loss"]}
        for target, names in (("mode", labeler.MODES), ("action", labeler.ACTIONS)):
            for name, c in zip(names, r[f"{target}_counts"]):
                wp, wr, wf1 = wmetrics.wp_wr_wf1(c)
                p, rc, f1 = wmetrics.standard_prf(c)
                item[name] = {"WP": wp, "WR": wr, "WF1": wf1, "P": p, "R": rc, "F1": f1}
        out.append(item)
    return out


def cmd_train(args, cp):
    labeled = _read_labels("train", args.labels)
    cfg = model_config(cp)
    kinds = model_kinds(cp)
    curves = {}
    try:
        for kind in kinds:
            tm = reactmodel.train(labeled, cfg, kind)
            reactmodel.save(os.path.join(args.out, f"model_{kind}.npz"), tm)
            curves[kind] = tm.curve
        if args.cv:
            rows = reactmodel.cross_validate(labeled, cfg, _get(cp, "model", "folds", int),
                                             _get(cp, "model", "repeats", int), kinds)
            _dump_json(os.path.join(args.out, "cv_results.json"), _cv_summary(rows))
    except (reactmodel.TrainingError, ValueError) as exc:
        raise StageError("train", str(exc), args.labels) from None
    reactmodel.write_loss_curve(os.path.join(args.out, "loss_curve.csv"), curves)


def cmd_predict(args, cp):
    _need("predict", args.model, args.features)
    tm = reactmodel.load(args.model)
    rows = []
    for fid, times, X in _read_features(args.features):
        try:
            rows.append((fid, times, reactmodel.predict(tm, X)))
        except ValueError as exc:
            raise StageError("predict", str(exc), fid) from None
    reactmodel.write_predictions(os.path.join(args.out, "predictions.csv"), rows)


def _streams(stage, truth_path, pred_path):
    """Mode and action evaluation streams, aligned on (flight, timestamp)."""
    truth = _read_labels(stage, truth_path)
    _need(stage, pred_path)
    try:
        preds = _read_pred_or_labels(pred_path)
    except ValueError as exc:
        raise StageError(stage, str(exc), pred_path) from None
    modes, actions, probs = [], [], []
    for lf in truth:
        if lf.id not in preds:
            raise StageError(stage, "no predictions for flight", lf.id)
        times, p = preds[lf.id]
        pos = {int(t): i for i, t in enumerate(times)}
        missing = [int(t) for t in lf.times if int(t) not in pos]
        if missing:
            raise StageError(stage, "no prediction at timestamp", f"{lf.id}@{missing[0]}")
        idx = np.array([pos[int(t)] for t in lf.times], dtype=int)
        try:
            modes.append(wmetrics.EvalStream(lf.id, lf.times, lf.mode, p.mode[idx], lf.is_actual, lf.is_annotated))
            actions.append(wmetrics.EvalStream(lf.id, lf.times, lf.action, p.action[idx], lf.is_actual,
                                               lf.is_annotated))
        except ValueError as exc:
            raise StageError(stage, str(exc), lf.id) from None
        probs.append(p.mode_prob[idx])
    return truth, modes, actions, probs


def _read_pred_or_labels(path):
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if header == reactmodel.PREDICTION_HEADER:
        return reactmodel.read_predictions(path)
    # a label file used as predictions: one-hot probabilities
    out = {}
    eye = np.eye(3)
    for lf in labeler.read_labeled(path):
        out[lf.id] = (lf.times, reactmodel.Prediction(eye[lf.mode], lf.mode, eye[lf.action], lf.action, lf.cont))
    return out


def _evaluate(stage, args, cp):
    truth, modes, actions, probs = _streams(stage, args.truth, args.pred)
    params = score_params(cp)
    try:
        rep_m = wmetrics.evaluate(modes, labeler.MODES, wmetrics.MODE_G1, params)
        rep_a = wmetrics.evaluate(actions, labeler.ACTIONS, wmetrics.ACTION_G1, params)
    except wmetrics.InconsistentStream as exc:
        raise StageError(stage, str(exc), str(exc).split(":")[0]) from None
    return truth, modes, probs, rep_m, rep_a


def cmd_evaluate(args, cp):
    _, _, _, rep_m, rep_a = _evaluate("evaluate", args, cp)
    wmetrics.write_report(os.path.join(args.out, "metrics_modes"), rep_m)
    wmetrics.write_report(os.path.join(args.out, "metrics_actions"), rep_a)


def _ci(values):
    v = np.asarray(values, dtype=float)
    # Student t interval over folds
    half = sps.t.ppf(0.975, len(v) - 1) * v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else 0.0
    return float(v.mean()), float(v.mean() - half), float(v.mean() + half)


def cmd_report(args, cp):
    truth, modes, probs, rep_m, rep_a = _evaluate("report", args, cp)
    out = args.out
    params = score_params(cp)
    window = _get(cp, "score", "miss_window_s", float)
    # score-function curve
    wmetrics.write_score_curve(os.path.join(out, "score_curve.csv"), params)
    # mode priors by subsampling step, from the labelled rows as given
    steps = [int(v) for v in _floats(cp, "label", "prior_steps")]
    labeler.write_prior_report(os.path.join(out, "prior_report.csv"), labeler.prior_report(truth, steps))
    # metric tables
    wmetrics.write_report(os.path.join(out, "metrics_modes"), rep_m)
    wmetrics.write_report(os.path.join(out, "metrics_actions"), rep_a)
    # flights whose weighted and plain F1 differ most, as mode sequences
    gaps = []
    for k, s in enumerate(modes):
        rep = wmetrics.evaluate([s], labeler.MODES, wmetrics.MODE_G1, params)
        diff = [m["WF1"] - m["F1"] for m in rep["classes"].values() if m["defined"]]
        gaps.append((-float(np.mean(diff)) if diff else 0.0, s.flight_id, k))
    chosen = [k for _, _, k in sorted(gaps)[:args.sequences]]
    _write_sequences(os.path.join(out, "mode_sequences.csv"), [modes[k] for k in chosen])
    _write_probabilities(os.path.join(out, "mode_probabilities.csv"),
                         [(modes[k], probs[k]) for k in range(min(args.probabilities, len(modes)))])
    # critical misses per flight
    with open(os.path.join(out, "critical_misses.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["flight_id", "resolution_actions", "critical_misses"])
        for s in modes:
            w.writerow([s.flight_id, len(wmetrics.ratp_groups(s)), wmetrics.critical_misses(s, wmetrics.MODE_G1, window)])
    # cross-validation summary with 95% intervals over folds
    if args.cv:
        _need("report", args.cv)
        with open(args.cv, encoding="utf-8") as fh:
            cv = json.load(fh)
        with open(os.path.join(out, "cv_summary.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "class", "metric", "mean", "ci_low", "ci_high", "folds"])
            for kind in sorted({r["kind"] for r in cv}):
                rows = [r for r in cv if r["kind"] == kind]
                for name in (*labeler.MODES, *labeler.ACTIONS):
                    for metric in ("P", "R", "F1", "WP", "WR", "WF1"):
                        m, lo, hi = _ci([r[name][metric] for r in rows])
                        w.writerow([kind, name, metric, f"{m:.6f}", f"{lo:.6f}", f"{hi:.6f}", len(rows)])
                misses = sum(r["critical_misses"] for r in rows)
                actions = sum(r["resolution_actions"] for r in rows)
                w.writerow([kind, "all", "critical_miss_rate", f"{misses / actions if actions else 0.0:.6f}",
                            "", "", len(rows)])


def _write_sequences(path, streams):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["seq", "flight_id", "timestamp", "expert", "predicted", "trajectory_start", "actual_ratp"])
        seq = 0
        for s in streams:
            for i in range(len(s.times)):
                w.writerow([seq, s.flight_id, int(s.times[i]), labeler.MODES[s.truth[i]], labeler.MODES[s.pred[i]],
                            int(i == 0), int(s.is_actual[i])])
                seq += 1


def _write_probabilities(path, items):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["seq", "flight_id", "timestamp", *(f"p_{m}" for m in labeler.MODES), "trajectory_start",
                    "actual_ratp"])
        seq = 0
        for s, p in items:
            for i in range(len(s.times)):
                w.writerow([seq, s.flight_id, int(s.times[i]), *(f"{v:.6f}" for v in p[i]), int(i == 0),
                            int(s.is_actual[i])])
                seq += 1


# -- entry point -------------------------------------------------------------------

COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "enrich": cmd_enrich, "label": cmd_label,
            "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (missing keys take their defaults)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, help="overrides [model] seed and [synth] seed")
    p = argparse.ArgumentParser(prog="atcoreact", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="generate a synthetic scenario")
    s = sub.add_parser("ingest", parents=[common], help="resample surveillance and associate events")
    s.add_argument("--surveillance", required=True)
    s.add_argument("--events", required=True)
    s = sub.add_parser("enrich", parents=[common], help="fit the fan and enrich every trajectory point")
    s.add_argument("--trajectories", required=True)
    s.add_argument("--airports", help="airport CSV (default: [paths] airports)")
    s.add_argument("--stats", help="reuse fitted deviation stats instead of fitting")
    s = sub.add_parser("label", parents=[common], help="label modes and actions")
    s.add_argument("--enriched", required=True)
    s.add_argument("--associations", required=True)
    s = sub.add_parser("train", parents=[common], help="train the configured models")
    s.add_argument("--labels", required=True)
    s.add_argument("--cv", action="store_true", help="also run the configured k-fold cross-validation")
    s = sub.add_parser("predict", parents=[common], help="predict modes and actions")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True, help="labelled or enriched CSV")
    for name in ("evaluate", "report"):
        s = sub.add_parser(name, parents=[common], help=f"{name} predictions against labels")
        s.add_argument("--truth", required=True)
        s.add_argument("--pred", required=True, help="prediction CSV (or a label CSV)")
        if name == "report":
            s.add_argument("--cv", help="cv_results.json from `train --cv`")
            s.add_argument("--sequences", type=int, default=5)
            s.add_argument("--probabilities", type=int, default=10)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cp = load_config(args.config)
        if args.seed is not None:
            cp["model"]["seed"] = cp["synth"]["seed"] = str(args.seed)
        validate(cp)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    try:
        COMMANDS[args.command](args, cp)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    write_effective_config(cp, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
