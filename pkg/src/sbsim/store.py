"""Append-only time-series store with a bit-exact CSV surface.

CSV schema: `timestamp,node_id,sensor,value,unit` with UTC ISO-8601
millisecond timestamps ('Z' suffix, LF endings, UTF-8). Values carry up
to six fractional digits, trailing zeros trimmed, and integers render
without a decimal point, so export -> import -> export is the identity
on bytes.
"""

import math
import threading
from dataclasses import dataclass, field
from typing import Optional

from .building import KIND_UNITS, Reading
from .clock import iso_utc, parse_ts
from .errors import BadHeader, BadRow, NonFinite, OutOfOrder, SinkError

CSV_HEADER = "timestamp,node_id,sensor,value,unit"


def fmt_value(v: float) -> str:
    """Canonical numeric rendering: <= 6 fractional digits, no trailing zeros."""
    if v == int(v):
        return str(int(v))
    s = f"{v:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("", "-", "-0") else s


@dataclass(frozen=True)
class RangeQuery:
    from_ms: int
    to_ms: int  # half-open: [from, to)
    node_filter: Optional[frozenset] = None
    kind_filter: Optional[frozenset] = None

    def __post_init__(self):
        if self.from_ms > self.to_ms:
            raise ValueError("from must be <= to")

    def matches(self, r: Reading) -> bool:
        if not self.from_ms <= r.ts_ms < self.to_ms:
            return False
        if self.node_filter is not None and r.node_id not in self.node_filter:
            return False
        if self.kind_filter is not None and r.kind not in self.kind_filter:
            return False
        return True


@dataclass
class Series:
    key: tuple[str, str]  # (node_id, kind)
    points: list[tuple[int, float]] = field(default_factory=list)  # (ts_ms, value)


class TimeSeriesStore:
    """In-memory append log; appends serialized, queries see a consistent prefix."""

    def __init__(self):
        self._log: list[Reading] = []
        self._last_ts: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._log)

    def append(self, r: Reading) -> int:
        """Durable in-order append; returns a dense, strictly increasing offset."""
        if not isinstance(r.value, (int, float)) or isinstance(r.value, bool) \
                or not math.isfinite(r.value):
            raise NonFinite(f"value {r.value!r} for {r.node_id}/{r.kind}")
        if KIND_UNITS.get(r.kind, r.unit) != r.unit:
            raise ValueError(f"unit {r.unit!r} does not match kind {r.kind!r}")
        key = (r.node_id, r.kind)
        with self._lock:
            last = self._last_ts.get(key)
            if last is not None and r.ts_ms < last:
                raise OutOfOrder(f"{key}: {r.ts_ms} < {last}")
            self._last_ts[key] = r.ts_ms
            self._log.append(r)
            return len(self._log) - 1

    def query_range(self, q: RangeQuery) -> list[Reading]:
        """Matching readings in (timestamp, node_id, kind) order."""
        with self._lock:
            snapshot = list(self._log)
        hits = [r for r in snapshot if q.matches(r)]
        hits.sort(key=lambda r: (r.ts_ms, r.node_id, r.kind))
        return hits

    def full_range(self) -> RangeQuery:
        with self._lock:
            if not self._log:
                return RangeQuery(0, 0)
            lo = min(r.ts_ms for r in self._log)
            hi = max(r.ts_ms for r in self._log)
        return RangeQuery(lo, hi + 1)

    def series(self, node_id: str, kind: str) -> Series:
        with self._lock:
            pts = [(r.ts_ms, r.value) for r in self._log
                   if r.node_id == node_id and r.kind == kind]
        return Series((node_id, kind), pts)

    # -- export / import ----------------------------------------------------------

    def export_csv(self, q: RangeQuery, sink) -> int:
        """Write header + matching rows; returns the number of data rows."""
        rows = self.query_range(q)
        try:
            sink.write(CSV_HEADER + "\n")
            for r in rows:
                sink.write(f"{iso_utc(r.ts_ms)},{r.node_id},{r.kind},"
                           f"{fmt_value(r.value)},{r.unit}\n")
        except OSError as exc:
            raise SinkError(str(exc)) from exc
        return len(rows)

    def import_csv(self, source) -> int:
        """Append rows in file order; the first malformed row aborts with its line number."""
        lines = source.read().splitlines()
        if not lines or lines[0] != CSV_HEADER:
            raise BadHeader(f"expected header {CSV_HEADER!r}")
        count = 0
        for line_no, line in enumerate(lines[1:], start=2):
            if line == "":
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise BadRow(line_no, f"expected 5 fields, got {len(parts)}")
            ts_raw, node_id, kind, value_raw, unit = parts
            try:
                ts = parse_ts(ts_raw)
            except ValueError:
                raise BadRow(line_no, f"bad timestamp {ts_raw!r}") from None
            try:
                value = float(value_raw)
            except ValueError:
                raise BadRow(line_no, f"bad value {value_raw!r}") from None
            if not math.isfinite(value):
                raise BadRow(line_no, f"non-finite value {value_raw!r}")
            if not node_id:
                raise BadRow(line_no, "empty node_id")
            if KIND_UNITS.get(kind) != unit:
                raise BadRow(line_no, f"unit {unit!r} does not match sensor {kind!r}")
            try:
                self.append(Reading(None, ts, node_id, kind, value, unit))
            except OutOfOrder as exc:
                raise BadRow(line_no, str(exc)) from None
            count += 1
        return count


def downsample(series: Series, window_ms: int, agg: str) -> Series:
    """One point per non-empty window, stamped at the window start.

    Windows align to epoch multiples of window_ms; agg is one of
    mean, min, max, last.
    """
    if window_ms <= 0:
        raise ValueError("window must be positive")
    if agg not in ("mean", "min", "max", "last"):
        raise ValueError(f"unknown aggregation {agg!r}")
    buckets: dict[int, list[float]] = {}
    order: list[int] = []
    for ts, v in series.points:
        start = ts - ts % window_ms
        if start not in buckets:
            buckets[start] = []
            order.append(start)
        buckets[start].append(v)
    out = []
    for start in sorted(order):
        vals = buckets[start]
        if agg == "mean":
            out.append((start, sum(vals) / len(vals)))
        elif agg == "min":
            out.append((start, min(vals)))
        elif agg == "max":
            out.append((start, max(vals)))
        else:
            out.append((start, vals[-1]))
    return Series(series.key, out)
