import numpy as np
import pytest

from atcoreact.geokin import GeoPoint, destination
from atcoreact.trajstore import (
    AtcoEvent,
    IngestError,
    RawTrackPoint,
    associate_events,
    build_trajectories,
    ingest_events,
    ingest_surveillance,
    level_segments,
    resample_5s,
    write_events,
    write_surveillance,
)

HEADER = "callsign,apt_from,apt_to,lon_deg,lat_deg,alt_ft,timestamp_s\n"
T0 = 1_500_000_000  # 2017-07-14, a multiple of 5


def _write(tmp_path, body, header=HEADER, name="surv.csv"):
    p = tmp_path / name
    p.write_text(header + body)
    return p


def _raw(ts, lons, lats=None, alts=None, callsign="ABC1"):
    lats = lats if lats is not None else [40.0] * len(ts)
    alts = alts if alts is not None else [35000.0] * len(ts)
    return [RawTrackPoint(callsign, "LEMG", "EGKK", GeoPoint(lo, la, al), t)
            for t, lo, la, al in zip(ts, lons, lats, alts)]


class TestIngest:
    def test_empty_file(self, tmp_path):
        rep = ingest_surveillance(_write(tmp_path, ""))
        assert rep.flights == {} and rep.errors == []

    def test_header_only_without_newline(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("")
        assert ingest_surveillance(p).flights == {}

    def test_interleaved_callsigns(self, tmp_path):
        body = "".join(
            f"{cs},LEMG,EGKK,{-3 + k * 0.01},40.0,35000,{T0 + t}\n"
            for k, (cs, t) in enumerate([("B", 10), ("A", 5), ("B", 0), ("A", 0), ("A", 10)]))
        rep = ingest_surveillance(_write(tmp_path, body))
        assert len(rep.flights) == 2
        for pts in rep.flights.values():
            ts = [p.timestamp for p in pts]
            assert ts == sorted(ts)
        assert [len(v) for v in rep.flights.values()] == [3, 2]

    def test_duplicate_timestamp_dropped(self, tmp_path):
        body = (f"A,X,Y,1.0,40.0,35000,{T0}\n"
                f"A,X,Y,1.5,40.0,35000,{T0}\n"
                f"A,X,Y,2.0,40.0,35000,{T0 + 5}\n")
        rep = ingest_surveillance(_write(tmp_path, body))
        pts = next(iter(rep.flights.values()))
        assert rep.duplicates == 1
        assert [p.pos.lon for p in pts] == [1.0, 2.0]

    def test_malformed_and_out_of_range(self, tmp_path):
        body = (f"A,X,Y,1.0,40.0,35000,{T0}\n"
                f"A,X,Y,abc,40.0,35000,{T0 + 5}\n"
                f"A,X,Y,1.0,95.0,35000,{T0 + 10}\n"
                f"A,X,Y,1.0\n")
        rep = ingest_surveillance(_write(tmp_path, body))
        assert [e[0] for e in rep.errors] == [3, 5]
        assert rep.rejected_range == 1
        with pytest.raises(IngestError, match=":3:"):
            ingest_surveillance(_write(tmp_path, body), strict=True)

    def test_bad_header(self, tmp_path):
        with pytest.raises(IngestError):
            ingest_surveillance(_write(tmp_path, "", header="a,b,c\n"))

    def test_events(self, tmp_path):
        p = tmp_path / "ev.csv"
        write_events(p, [AtcoEvent("A", "X", "Y", T0 + 3, "SPD", ""), AtcoEvent("B", "X", "Y", T0, "DCT", "S1")])
        events, errors = ingest_events(p)
        assert errors == []
        assert events[0] == AtcoEvent("A", "X", "Y", T0 + 3, "SPD", "")
        assert events[1].sector == "S1"


class TestResample:
    def test_on_grid_identity(self):
        ts = [T0, T0 + 5, T0 + 10, T0 + 15]
        lons = [-3.0, -2.9, -2.8, -2.7]
        (tr,) = resample_5s(_raw(ts, lons))
        assert list(tr.times) == ts
        assert list(tr.lon) == lons

    def test_linear_interpolation(self):
        # raw at 3 and 13 s; grid at 5 and 10 s is linear in t
        (tr,) = resample_5s(_raw([T0 + 3, T0 + 13], [0.0, 1.0], alts=[30000.0, 31000.0]))
        assert list(tr.times) == [T0 + 5, T0 + 10]
        assert tr.lon == pytest.approx([0.2, 0.7])
        assert tr.alt == pytest.approx([30200.0, 30700.0])

    def test_single_point_rejected(self):
        with pytest.raises(ValueError):
            resample_5s(_raw([T0], [0.0]))

    def test_gap_splits(self):
        ts = [T0, T0 + 5, T0 + 10, T0 + 100, T0 + 105, T0 + 110]
        trs = resample_5s(_raw(ts, np.linspace(0, 0.5, 6)))
        assert [list(t.times) for t in trs] == [ts[:3], ts[3:]]
        assert trs[0].id != trs[1].id

    def test_trajectory_invariants(self):
        rng = np.random.default_rng(0)
        ts = np.cumsum(rng.integers(1, 9, 300)) + T0
        start = GeoPoint(-3, 40, 35000)
        pts = [destination(start, 45.0, 0.13 * (t - T0)) for t in ts]
        trs = resample_5s(_raw(list(ts), [p.lon for p in pts], [p.lat for p in pts]))
        for tr in trs:
            assert np.all(tr.times % 5 == 0)
            assert np.all(np.diff(tr.times) == 5)
            assert np.all((tr.course >= 0) & (tr.course < 360))
            # great-circle course drifts slowly along the path
            assert np.all(np.abs(np.diff(tr.course)) < 0.1)
            assert tr.h_speed == pytest.approx(0.13 * 3600, rel=1e-3)

    def test_round_trip(self, tmp_path):
        start = GeoPoint(-3, 40, 35000)
        ts = [T0 + 2 + 4 * k for k in range(50)]
        pts = [destination(start, 80.0, 0.12 * (t - T0)) for t in ts]
        trs = resample_5s(_raw(ts, [p.lon for p in pts], [p.lat for p in pts]))
        path = tmp_path / "rt.csv"
        write_surveillance(path, trs)
        again = build_trajectories(ingest_surveillance(path))
        assert len(again) == len(trs)
        for a, b in zip(trs, again):
            for col in ("times", "lon", "lat", "alt", "course", "h_speed", "v_speed"):
                assert np.array_equal(getattr(a, col), getattr(b, col))


def test_level_segments():
    ts = [T0 + 5 * k for k in range(100)]
    alts = [30000.0 + (0 if k < 40 or k >= 60 else 100.0 * (k - 39)) for k in range(100)]
    alts = [a if k < 60 else alts[59] for k, a in enumerate(alts)]
    (tr,) = resample_5s(_raw(ts, np.linspace(0, 1, 100), alts=alts))
    segs = level_segments(tr)
    assert len(segs) == 2
    assert all(np.all(np.abs(s.v_speed) < 500) for s in segs)
    assert segs[0].id != segs[1].id


class TestAssociate:
    def _traj(self, callsign="ABC1", start=T0):
        (tr,) = resample_5s(_raw([start + 5 * k for k in range(20)], np.linspace(0, 0.3, 20), callsign=callsign))
        return tr

    def test_exact_point(self):
        tr = self._traj()
        rep = associate_events([AtcoEvent("ABC1", "LEMG", "EGKK", T0 + 35, "SPD")], [tr])
        assert rep.associations[0].point_index == 7

    def test_tie_goes_to_earlier(self):
        tr = self._traj()
        ev = AtcoEvent("ABC1", "LEMG", "EGKK", T0 + 37, "SPD")
        assert associate_events([ev], [tr]).associations[0].point_index == 7
        ev = AtcoEvent("ABC1", "LEMG", "EGKK", T0 + 38, "SPD")
        assert associate_events([ev], [tr]).associations[0].point_index == 8

    def test_half_second_tie(self):
        tr = self._traj()
        ev = AtcoEvent("ABC1", "LEMG", "EGKK", T0 + 37.5, "SPD")
        assert associate_events([ev], [tr]).associations[0].point_index == 7

    def test_before_first_point(self):
        tr = self._traj()
        rep = associate_events([AtcoEvent("ABC1", "LEMG", "EGKK", T0 - 1, "SPD")], [tr])
        assert rep.associations == [] and len(rep.unassociated) == 1

    def test_airport_mismatch(self):
        tr = self._traj()
        rep = associate_events([AtcoEvent("ABC1", "LEMG", "EHAM", T0 + 10, "SPD")], [tr])
        assert len(rep.unassociated) == 1

    def test_ambiguous(self):
        a, b = self._traj(), self._traj()
        b.segment = 1
        rep = associate_events([AtcoEvent("ABC1", "LEMG", "EGKK", T0 + 10, "SPD")], [a, b])
        assert len(rep.ambiguous) == 1 and rep.associations == []

    def test_random_conditions_hold(self):
        rng = np.random.default_rng(4)
        trajs = []
        for k in range(30):
            start = T0 + 5 * int(rng.integers(0, 2000))
            n = int(rng.integers(2, 60))
            (tr,) = resample_5s(_raw([start + 5 * i for i in range(n)], np.linspace(0, 0.2, n),
                                     callsign=f"C{k % 10}"))
            tr.segment = k
            trajs.append(tr)
        by_id = {t.id: t for t in trajs}
        events = [AtcoEvent(f"C{int(rng.integers(0, 12))}", "LEMG", "EGKK",
                            T0 + int(rng.integers(-100, 10500)), "SPD") for _ in range(1000)]
        rep = associate_events(events, trajs)
        assert len(rep.associations) + len(rep.unassociated) + len(rep.ambiguous) == 1000
        assert rep.associations
        for a in rep.associations:
            tr = by_id[a.trajectory_id]
            ev = a.event
            assert (ev.callsign, ev.apt_from, ev.apt_to) == tr.flight[:3]
            assert tr.times[0] <= ev.timestamp <= tr.times[-1]
            gaps = np.abs(tr.times - ev.timestamp)
            assert gaps[a.point_index] == gaps.min()
            assert a.point_index == int(np.flatnonzero(gaps == gaps.min())[0])
        for ev in rep.unassociated:
            assert not any(ev.callsign == t.flight.callsign and t.times[0] <= ev.timestamp <= t.times[-1]
                           for t in trajs)
