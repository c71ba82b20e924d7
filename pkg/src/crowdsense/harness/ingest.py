"""GPS trajectory ingestion (T-Drive and Grab-Posisi CSV layouts) into workers."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Sequence

from ..grid import Worker, manhattan
from .scales import ScaleConfig

SKIP_LIMIT = 0.10


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class TrajectoryRecord:
    entity: str
    timestamp: float  # seconds since the epoch, UTC
    lon: float
    lat: float

    def __post_init__(self):
        if not (math.isfinite(self.timestamp) and math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise ValueError("non-finite trajectory field")


@dataclass(frozen=True)
class ReadResult:
    records: tuple[TrajectoryRecord, ...]
    rows: int
    skipped: int

    @property
    def skip_rate(self) -> float:
        return self.skipped / self.rows if self.rows else 0.0


def parse_time(s: str) -> float:
    s = s.strip()
    try:
        return float(s)
    except ValueError:
        pass
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _finish(records: list, rows: int, skipped: int, limit: float) -> ReadResult:
    res = ReadResult(tuple(records), rows, skipped)
    if res.skip_rate > limit:
        raise IngestError(f"{skipped} of {rows} rows unparseable ({res.skip_rate:.1%} > {limit:.0%})")
    return res


def read_tdrive(lines: Iterable[str], skip_limit: float = SKIP_LIMIT) -> ReadResult:
    """Rows of ``id,datetime,longitude,latitude`` with no header."""
    records, rows, skipped = [], 0, 0
    for row in csv.reader(lines):
        if not row or not "".join(row).strip():
            continue
        rows += 1
        try:
            ent, ts, lon, lat = row
            records.append(TrajectoryRecord(ent.strip(), parse_time(ts), float(lon), float(lat)))
        except ValueError:
            skipped += 1
    return _finish(records, rows, skipped, skip_limit)


def read_grab(lines: Iterable[str], skip_limit: float = SKIP_LIMIT) -> ReadResult:
    """Header CSV with ``trj_id``, ``pingtimestamp``, ``rawlat``, ``rawlng`` (other columns ignored)."""
    reader = csv.DictReader(lines)
    need = {"trj_id", "pingtimestamp", "rawlat", "rawlng"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise IngestError(f"Grab CSV needs columns {sorted(need)}")
    records, rows, skipped = [], 0, 0
    for row in reader:
        rows += 1
        try:
            records.append(TrajectoryRecord(str(row["trj_id"]).strip(), parse_time(row["pingtimestamp"]),
                                            float(row["rawlng"]), float(row["rawlat"])))
        except (ValueError, TypeError, AttributeError):
            skipped += 1
    return _finish(records, rows, skipped, skip_limit)


def bin_index(v: float, lo: float, hi: float, n: int) -> int | None:
    """Equal-width bin of ``v`` in ``[lo, hi]``; a value on an inner edge goes to the lower bin.

    Bins are ``(lo + k*w, lo + (k+1)*w]`` with the first one closed at ``lo``.
    Values outside ``[lo, hi]`` return ``None``.
    """
    if not lo <= v <= hi:
        return None
    k = math.ceil((v - lo) / (hi - lo) * n) - 1
    return min(max(k, 0), n - 1)


def ingest_trajectories(records: Iterable[TrajectoryRecord], bbox: Sequence[float], scale: ScaleConfig,
                        window: tuple[float, float]) -> list[Worker]:
    """One worker per entity from its first and last in-box, in-window fixes.

    ``bbox`` is ``(lon_min, lat_min, lon_max, lat_max)``; ``window`` is a
    ``[start, end)`` pair of epoch seconds.  Entities are ranked by fix count.
    """
    lon0, lat0, lon1, lat1 = map(float, bbox)
    if not (lon1 > lon0 and lat1 > lat0):
        raise IngestError("bounding box is degenerate")
    start, end = window
    if end <= start:
        raise IngestError("time window is empty")
    W, H = scale.grid
    T = scale.num_slots
    slot = scale.slot_minutes * 60.0
    fixes: dict[str, list] = {}
    for r in records:
        if not start <= r.timestamp < end:
            continue
        x = bin_index(r.lon, lon0, lon1, W)
        y = bin_index(r.lat, lat0, lat1, H)
        if x is None or y is None:
            continue
        t = min(int((r.timestamp - start) // slot), T - 1)
        fixes.setdefault(r.entity, []).append((r.timestamp, x, y, t))
    cands = []
    for ent, fs in fixes.items():
        fs.sort()
        _, ox, oy, t0 = fs[0]
        _, dx, dy, t1 = fs[-1]
        if (ox, oy) == (dx, dy) and len(fs) < 2:
            continue
        need = manhattan((ox, oy), (dx, dy))
        t1 = max(t1, t0 + max(need, 1))
        if t1 > T - 1:
            t0 = max(0, T - 1 - max(need, 1))
            t1 = T - 1
            if t1 - t0 < need:
                continue
        cands.append((-len(fs), ent, (ox, oy), (dx, dy), (t0, t1)))
    cands.sort()
    return [Worker(i, o, d, w, label=ent) for i, (_, ent, o, d, w) in enumerate(cands[: scale.workers])]
