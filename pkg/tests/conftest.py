import numpy as np
import pytest

from atcoreact.geokin import GeoPoint, destination
from atcoreact.trajstore import FlightId, Trajectory, attach_kinematics

T0 = 1_500_000_000


def straight(callsign, start: GeoPoint, course, speed_kt, t0=T0, duration=600, apt=("LEMG", "EGKK"), seg=0):
    """Constant-course, constant-speed trajectory on the 5 s grid."""
    times = np.arange(t0, t0 + duration + 1, 5, dtype=np.int64)
    pts = [destination(start, course, speed_kt * (t - t0) / 3600.0) for t in times]
    lon = np.array([p.lon for p in pts])
    lat = np.array([p.lat for p in pts])
    alt = np.full(len(times), float(start.alt))
    c, h, v = attach_kinematics(times, lon, lat, alt)
    return Trajectory(FlightId(callsign, apt[0], apt[1], "2017-07-14"), times, lon, lat, alt, c, h, v, seg)


@pytest.fixture
def make_straight():
    return straight
