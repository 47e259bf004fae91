"""Fuse people-counter events and MAC presence sightings per room.

Fusion rule: count = max(clamped counter cumsum, live MAC count), where a
MAC is live for lease_ms after its last sighting (live iff at - last < lease).
Confidence is High iff the two signals agree within 1. Door readings are
recorded but never change the count; they feed the security app.

Absence intervals are the maximal spans where the fused count stays zero
for at least min_gap, bounded by the enclosing zero-crossing timestamps.
"""

import heapq
from dataclasses import dataclass
from typing import Optional, Union

from .building import Reading
from .errors import RoomUnknown

DEFAULT_LEASE_MS = 5 * 60_000
DEFAULT_MIN_GAP_MS = 10 * 60_000

HIGH = "High"
LOW = "Low"


@dataclass(frozen=True)
class PresenceSighting:
    mac: str
    room_id: str
    ts_ms: int
    rssi_dbm: float

    def __post_init__(self):
        if self.rssi_dbm > 0:
            raise ValueError("rssi_dbm must be <= 0")


@dataclass(frozen=True)
class OccupancyEstimate:
    room_id: str
    ts_ms: int
    count: int
    known_macs: frozenset
    confidence: str  # High | Low


@dataclass(frozen=True)
class AbsenceInterval:
    room_id: str
    start_ms: int
    end_ms: Optional[int]  # None = still open at the end of the queried range


class _RoomTrace:
    __slots__ = ("deltas", "sightings", "cum", "last_seen", "last_ts")

    def __init__(self):
        self.deltas: list[tuple[int, int]] = []        # (ts, +-1) in update order
        self.sightings: list[tuple[int, str]] = []     # (ts, mac) in update order
        self.cum = 0
        self.last_seen: dict[str, int] = {}
        self.last_ts = 0


class OccupancyTracker:
    def __init__(self, room_ids, lease_ms: int = DEFAULT_LEASE_MS):
        if lease_ms <= 0:
            raise ValueError("lease_ms must be positive")
        self.lease_ms = lease_ms
        self._rooms: dict[str, _RoomTrace] = {r: _RoomTrace() for r in room_ids}
        self._room_of_node: dict[str, str] = {}

    def _trace(self, room_id: str) -> _RoomTrace:
        try:
            return self._rooms[room_id]
        except KeyError:
            raise RoomUnknown(room_id) from None

    def bind_node(self, node_id: str, room_id: str) -> None:
        """Teach the tracker which room a reading's node belongs to."""
        self._trace(room_id)
        self._room_of_node[node_id] = room_id

    def update(self, item: Union[Reading, PresenceSighting],
               room_id: Optional[str] = None) -> OccupancyEstimate:
        """Fold one input into the room state; returns the fresh estimate."""
        if isinstance(item, PresenceSighting):
            tr = self._trace(item.room_id)
            tr.sightings.append((item.ts_ms, item.mac))
            prev = tr.last_seen.get(item.mac)
            if prev is None or item.ts_ms > prev:
                tr.last_seen[item.mac] = item.ts_ms
            tr.last_ts = max(tr.last_ts, item.ts_ms)
            return self.current_estimate(item.room_id, item.ts_ms)
        room = room_id or self._room_of_node.get(item.node_id)
        if room is None:
            raise RoomUnknown(f"no room bound for node {item.node_id!r}")
        tr = self._trace(room)
        if item.kind == "people-counter":
            delta = int(item.value)
            tr.deltas.append((item.ts_ms, delta))
            tr.cum = max(0, tr.cum + delta)  # clamp at zero, path-dependent
        elif item.kind != "door":
            raise ValueError(f"occupancy cannot consume kind {item.kind!r}")
        tr.last_ts = max(tr.last_ts, item.ts_ms)
        return self.current_estimate(room, item.ts_ms)

    def present_macs(self, room_id: str, at_ms: int) -> frozenset:
        tr = self._trace(room_id)
        if at_ms >= tr.last_ts:
            live = [m for m, seen in tr.last_seen.items()
                    if seen <= at_ms < seen + self.lease_ms]
        else:  # historical query: rescan the trace
            seen_at: dict[str, int] = {}
            for ts, mac in tr.sightings:
                if ts <= at_ms and ts > seen_at.get(mac, -1):
                    seen_at[mac] = ts
            live = [m for m, seen in seen_at.items() if at_ms < seen + self.lease_ms]
        return frozenset(live)

    def current_estimate(self, room_id: str, at_ms: int) -> OccupancyEstimate:
        tr = self._trace(room_id)
        if at_ms >= tr.last_ts:
            cum = tr.cum
        else:
            cum = 0
            for ts, delta in tr.deltas:
                if ts <= at_ms:
                    cum = max(0, cum + delta)
        macs = self.present_macs(room_id, at_ms)
        count = max(cum, len(macs))
        confidence = HIGH if abs(cum - len(macs)) <= 1 else LOW
        return OccupancyEstimate(room_id, at_ms, count, macs, confidence)

    def count_timeline(self, room_id: str) -> list[tuple[int, int]]:
        """Fused-count change points [(ts, count)], right-continuous, whole trace.

        Change points are counter events, sightings, and lease expiries;
        a sighting at its own expiry instant refreshes the lease (latest
        sighting wins, independent of arrival order).
        """
        tr = self._trace(room_id)
        events: dict[int, list] = {}
        candidates = set()
        for ts, delta in tr.deltas:
            events.setdefault(ts, []).append(("delta", delta))
            candidates.add(ts)
        for ts, mac in tr.sightings:
            events.setdefault(ts, []).append(("mac", mac))
            candidates.add(ts)
            candidates.add(ts + self.lease_ms)
        cum = 0
        last_seen: dict[str, int] = {}
        expiry: list = []  # (ts + lease, mac, ts)
        timeline: list[tuple[int, int]] = []
        for t in sorted(candidates):
            for kind, arg in events.get(t, ()):
                if kind == "delta":
                    cum = max(0, cum + arg)
                else:
                    prev = last_seen.get(arg)
                    if prev is None or t > prev:
                        last_seen[arg] = t
                        heapq.heappush(expiry, (t + self.lease_ms, arg, t))
            while expiry and expiry[0][0] <= t:
                _, mac, seen = heapq.heappop(expiry)
                if last_seen.get(mac) == seen:
                    del last_seen[mac]
            count = max(cum, len(last_seen))
            if not timeline or timeline[-1][1] != count:
                timeline.append((t, count))
        return timeline

    def absence_intervals(self, room_id: str, from_ms: int, to_ms: int,
                          min_gap_ms: int = DEFAULT_MIN_GAP_MS) -> list[AbsenceInterval]:
        """Maximal zero-count spans of at least min_gap inside [from, to).

        A zero span still running at the end of the range is reported with
        an open end (end_ms=None).
        """
        if min_gap_ms <= 0:
            raise ValueError("min_gap must be positive")
        timeline = self.count_timeline(room_id)
        if from_ms >= to_ms:
            return []
        # Count at the start of the range, then changes strictly inside it.
        count_at_from = 0
        for ts, count in timeline:
            if ts <= from_ms:
                count_at_from = count
            else:
                break
        segments = [(from_ms, count_at_from)]
        segments += [(ts, count) for ts, count in timeline if from_ms < ts < to_ms]
        out: list[AbsenceInterval] = []
        run_start: Optional[int] = None
        for ts, count in segments:
            if count == 0 and run_start is None:
                run_start = ts
            elif count > 0 and run_start is not None:
                if ts - run_start >= min_gap_ms:
                    out.append(AbsenceInterval(room_id, run_start, ts))
                run_start = None
        if run_start is not None and to_ms - run_start >= min_gap_ms:
            out.append(AbsenceInterval(room_id, run_start, None))
        return out
