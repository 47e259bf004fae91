"""Logical tick clock shared by every simulated component.

One tick is 100 ms of simulated time by default. All timestamps in the
system are integer milliseconds since the Unix epoch, derived from the
tick count, so runs are reproducible byte for byte.
"""

from datetime import datetime, timedelta, timezone

_UNIX_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_ONE_MS = timedelta(milliseconds=1)

DEFAULT_TICK_MS = 100

# Simulated runs start on this date unless configured otherwise.
DEFAULT_EPOCH_MS = int(datetime(2017, 3, 1, tzinfo=timezone.utc).timestamp() * 1000)


class LogicalClock:
    """Monotonic tick counter with tick-to-UTC conversion."""

    __slots__ = ("tick", "tick_ms", "epoch_ms")

    def __init__(self, tick_ms: int = DEFAULT_TICK_MS, epoch_ms: int = DEFAULT_EPOCH_MS):
        if tick_ms <= 0:
            raise ValueError("tick_ms must be positive")
        self.tick = 0
        self.tick_ms = tick_ms
        self.epoch_ms = epoch_ms

    @property
    def now(self) -> int:
        return self.tick

    @property
    def tick_seconds(self) -> float:
        return self.tick_ms / 1000.0

    def advance(self, n_ticks: int) -> int:
        if n_ticks < 0:
            raise ValueError("cannot advance clock backwards")
        self.tick += n_ticks
        return self.tick

    def advance_to(self, tick: int) -> int:
        if tick < self.tick:
            raise ValueError(f"cannot advance clock backwards ({self.tick} -> {tick})")
        self.tick = tick
        return self.tick

    def ts_ms(self, tick: int | None = None) -> int:
        """UTC timestamp in ms for a tick (default: current tick)."""
        t = self.tick if tick is None else tick
        return self.epoch_ms + t * self.tick_ms

    def tick_for(self, ts_ms: int) -> int:
        """Tick whose timestamp is closest at or below ts_ms."""
        return (ts_ms - self.epoch_ms) // self.tick_ms


def iso_utc(ts_ms: int) -> str:
    """Render epoch-ms as ISO-8601 UTC with millisecond precision: 2017-03-01T10:00:00.000Z"""
    sec, ms = divmod(ts_ms, 1000)
    dt = datetime.fromtimestamp(sec, tz=timezone.utc)
    return f"{dt:%Y-%m-%dT%H:%M:%S}.{ms:03d}Z"


def parse_ts(value) -> int:
    """Accept epoch-ms ints or ISO-8601 UTC strings ('Z' or '+00:00', optional millis)."""
    if isinstance(value, bool):
        raise ValueError(f"not a timestamp: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return (dt - _UNIX_EPOCH) // _ONE_MS
    raise ValueError(f"not a timestamp: {value!r}")
