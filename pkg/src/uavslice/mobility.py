"""User traces, per-slot ground truth and the UAV beacon logs.

Trace CSV format (header required)::

    user_id,timestamp_s,x,y

Rows may come in any order.  Each user's samples are sorted by time,
linearly interpolated onto the slot grid ``t0 + k * slot_seconds`` (held
constant outside the user's own time span) and the bounding box of all
selected traces is mapped affinely onto the simulation area.
"""

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np

RATE_CLASSES_MBPS = (1.0, 2.0, 4.0)


@dataclass
class UserTrace:
    user_id: str
    positions: np.ndarray          # (n_slots, 2) metres, one row per slot
    rate_class: float              # C^th in Mbps
    height_m: float = 1.8

    @property
    def n_slots(self):
        return self.positions.shape[0]


class TraceFormatError(ValueError):
    pass


def _read_rows(path):
    raw = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["user_id", "timestamp_s", "x", "y"]:
            raise TraceFormatError(f"{path}: line 1: expected header user_id,timestamp_s,x,y")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise TraceFormatError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            try:
                ts, x, y = float(row[1]), float(row[2]), float(row[3])
            except ValueError as exc:
                raise TraceFormatError(f"{path}: line {lineno}: {exc}") from None
            if not (np.isfinite(ts) and np.isfinite(x) and np.isfinite(y)):
                raise TraceFormatError(f"{path}: line {lineno}: non-finite value")
            raw.setdefault(row[0].strip(), []).append((ts, x, y))
    return raw


def _user_sort_key(uid):
    return (0, int(uid), uid) if uid.isdigit() else (1, 0, uid)


def load_traces(path, area, n_users, slot_seconds=200.0, n_slots=None, rng=None,
                rate_classes=None):
    """Read a trace CSV and resample it onto the simulation slot grid.

    The first ``n_users`` ids (numeric order when ids are integers) are
    kept.  ``rate_classes`` pins per-user C^th values; otherwise classes are
    drawn uniformly from {1, 2, 4} Mbps with ``rng``.
    """
    raw = _read_rows(path)
    if len(raw) < n_users:
        raise ValueError(f"{path}: {len(raw)} users in file, {n_users} requested")
    ids = sorted(raw, key=_user_sort_key)[:n_users]
    series = {}
    for uid in ids:
        pts = np.asarray(sorted(raw[uid]), dtype=np.float64)
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise TraceFormatError(f"{path}: user {uid}: duplicate timestamps")
        series[uid] = pts
    allpts = np.vstack(list(series.values()))
    t0, t1 = allpts[:, 0].min(), allpts[:, 0].max()
    if n_slots is None:
        n_slots = int(np.floor((t1 - t0) / slot_seconds)) + 1
    grid = t0 + slot_seconds * np.arange(n_slots)
    lo = allpts[:, 1:].min(axis=0)
    span = allpts[:, 1:].max(axis=0) - lo
    area = np.asarray(area, dtype=np.float64)
    if rate_classes is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        rate_classes = rng.choice(RATE_CLASSES_MBPS, size=n_users)
    traces = []
    for k, uid in enumerate(ids):
        pts = series[uid]
        xy = np.column_stack([np.interp(grid, pts[:, 0], pts[:, 1]),
                              np.interp(grid, pts[:, 0], pts[:, 2])])
        scaled = np.where(span > 0, (xy - lo) / np.where(span > 0, span, 1.0), 0.5) * area
        traces.append(UserTrace(uid, scaled, float(rate_classes[k])))
    return traces


def write_traces_csv(path, traces, slot_seconds=200.0):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "timestamp_s", "x", "y"])
        for tr in traces:
            for k, (x, y) in enumerate(tr.positions):
                w.writerow([tr.user_id, f"{k * slot_seconds:.3f}", f"{x:.6f}", f"{y:.6f}"])


def synthetic_traces(n_users, n_slots, area, rng, slot_seconds=200.0,
                     speed_range=(0.05, 0.3), pause_slots=(0, 3), n_hotspots=3,
                     hotspot_spread=120.0, rate_classes=None):
    """Random-waypoint pedestrians whose waypoints cluster around hotspots.

    Speeds (m/s) are drawn per leg from ``speed_range`` and must stay at or
    below 1.5 m/s.  The default range is slow because one slot spans
    ``slot_seconds`` of wall time and the whole area is only 1 km wide.
    """
    if speed_range[1] > 1.5:
        raise ValueError("pedestrian speed must not exceed 1.5 m/s")
    area = np.asarray(area, dtype=np.float64)
    centres = rng.uniform(0.15, 0.85, size=(n_hotspots, 2)) * area

    def waypoint():
        c = centres[rng.integers(n_hotspots)]
        return np.clip(c + rng.normal(0.0, hotspot_spread, size=2), 0.0, area)

    if rate_classes is None:
        rate_classes = rng.choice(RATE_CLASSES_MBPS, size=n_users)
    traces = []
    for i in range(n_users):
        pos = waypoint()
        target = waypoint()
        speed = rng.uniform(*speed_range)
        pause = 0
        out = np.empty((n_slots, 2))
        for k in range(n_slots):
            out[k] = pos
            if pause > 0:
                pause -= 1
                continue
            step = speed * slot_seconds
            gap = target - pos
            dist = float(np.hypot(*gap))
            if dist <= step:
                pos = target
                target = waypoint()
                speed = rng.uniform(*speed_range)
                pause = int(rng.integers(pause_slots[0], pause_slots[1] + 1))
            else:
                pos = pos + gap * (step / dist)
        traces.append(UserTrace(str(i), out, float(rate_classes[i])))
    return traces


def positions_at(traces, t):
    """(N, 2) true user positions at slot ``t``."""
    n_slots = traces[0].n_slots if traces else 0
    if not 0 <= t < n_slots:
        raise IndexError(f"slot {t} outside trace horizon [0, {n_slots})")
    return np.array([tr.positions[t] for tr in traces])


class BeaconLog:
    """Per (UAV, user) ring of the most recent (slot, position) beacons."""

    def __init__(self, n_uavs, capacity):
        self.n_uavs = n_uavs
        self.capacity = capacity
        self._store = {}

    def samples(self, uav, user):
        return list(self._store.get((uav, user), ()))

    def append(self, uav, user, slot, pos):
        buf = self._store.get((uav, user))
        if buf is None:
            buf = self._store[(uav, user)] = deque(maxlen=self.capacity)
        buf.append((slot, np.array(pos, dtype=np.float64)))

    def latest(self, user):
        """Newest (slot, pos) for ``user`` across all UAVs, or None."""
        best = None
        for j in range(self.n_uavs):
            buf = self._store.get((j, user))
            if buf and (best is None or buf[-1][0] > best[0]):
                best = buf[-1]
        return best

    def total(self):
        return sum(len(b) for b in self._store.values())


def beacon_refresh(log, uav_pos, user_pos, t, t_p=1, coverage_radius_m=500.0):
    """Append beacons heard by each UAV (horizontal distance) on refresh slots."""
    if t_p < 1:
        raise ValueError("T_p must be >= 1")
    if t % t_p != 0:
        return log
    uav_pos = np.asarray(uav_pos, dtype=np.float64)[:, :2]
    user_pos = np.asarray(user_pos, dtype=np.float64)[:, :2]
    d = np.linalg.norm(uav_pos[:, None, :] - user_pos[None, :, :], axis=2)
    for j, i in zip(*np.nonzero(d <= coverage_radius_m)):
        log.append(int(j), int(i), t, user_pos[i])
    return log
