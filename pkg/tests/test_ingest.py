import io
import random

import pytest
from hypothesis import given, strategies as st

from crowdsense.harness.ingest import (
    IngestError, TrajectoryRecord, bin_index, ingest_trajectories, parse_time, read_grab, read_tdrive,
)
from crowdsense.harness.scales import get_scale

SMALL = get_scale("Small")
BBOX = (116.0, 39.0, 116.8, 39.8)  # 0.1 degree cells on the 8x8 grid
T0 = parse_time("2008-02-02T13:00:00")


def test_bin_edges():
    assert bin_index(0.0, 0.0, 8.0, 8) == 0
    assert bin_index(1.0, 0.0, 8.0, 8) == 0  # inner edge goes to the lower bin
    assert bin_index(1.0000001, 0.0, 8.0, 8) == 1
    assert bin_index(8.0, 0.0, 8.0, 8) == 7
    assert bin_index(-0.1, 0.0, 8.0, 8) is None and bin_index(8.1, 0.0, 8.0, 8) is None


@given(st.floats(0, 1), st.integers(1, 64))
def test_bin_index_in_range(v, n):
    k = bin_index(v, 0.0, 1.0, n)
    assert 0 <= k < n
    assert k / n <= v <= (k + 1) / n or v == 0


def test_parse_time():
    assert parse_time("1200") == 1200.0
    assert parse_time("1970-01-01 00:20:00") == 1200.0
    assert parse_time("1970-01-01T01:20:00+01:00") == 1200.0


def test_tdrive_reader_and_skip_threshold():
    good = [f"7,2008-02-02 13:0{i}:00,116.05,39.05" for i in range(9)]
    res = read_tdrive(good + ["7,not a time,116.1,39.1"])
    assert res.rows == 10 and res.skipped == 1 and len(res.records) == 9
    with pytest.raises(IngestError, match="unparseable"):
        read_tdrive(good[:8] + ["x", "7,t,1,2"])


def test_grab_reader():
    text = "trj_id,driving_mode,osname,pingtimestamp,rawlat,rawlng,speed\n" \
           "a,car,ios,1554000000,1.30,103.80,4\n" \
           "a,car,ios,1554000060,1.31,103.81,4\n"
    res = read_grab(io.StringIO(text))
    assert [r.lat for r in res.records] == [1.30, 1.31] and res.records[0].lon == 103.80
    with pytest.raises(IngestError, match="columns"):
        read_grab(io.StringIO("id,lat\n1,2\n"))


def _recs():
    out = []
    for e, (x0, y0, x1, y1) in enumerate([(0, 0, 3, 0), (5, 5, 5, 2), (2, 2, 2, 2), (7, 7, 6, 7)]):
        n = 3 + e
        for i in range(n):
            f = i / (n - 1)
            out.append(TrajectoryRecord(f"car{e}", T0 + 600 * i,
                                        BBOX[0] + 0.1 * (x0 + (x1 - x0) * f) + 0.05,
                                        BBOX[1] + 0.1 * (y0 + (y1 - y0) * f) + 0.05))
    out.append(TrajectoryRecord("car0", T0 + 60, 200.0, 0.0))  # outside the box
    out.append(TrajectoryRecord("late", T0 + 3 * 3600, 116.05, 39.05))  # outside the window
    return out


def test_ingest_builds_reachable_workers():
    ws = ingest_trajectories(_recs(), BBOX, SMALL, (T0, T0 + 7200))
    assert [w.label for w in ws] == ["car3", "car2", "car1", "car0"]  # most fixes first
    assert [w.id for w in ws] == [0, 1, 2, 3]
    car0 = ws[3]
    assert car0.origin == (0, 0) and car0.destination == (3, 0) and car0.window[0] == 0
    assert all(w.reachable() and w.t_end <= SMALL.num_slots - 1 for w in ws)


def test_ingest_is_order_insensitive():
    recs = _recs()
    a = ingest_trajectories(recs, BBOX, SMALL, (T0, T0 + 7200))
    random.Random(3).shuffle(recs)
    assert ingest_trajectories(recs, BBOX, SMALL, (T0, T0 + 7200)) == a


def test_ingest_rejects_bad_box_and_window():
    with pytest.raises(IngestError):
        ingest_trajectories([], (1, 1, 1, 2), SMALL, (0, 1))
    with pytest.raises(IngestError):
        ingest_trajectories([], BBOX, SMALL, (5, 5))
