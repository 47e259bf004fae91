"""Security app: door-rule alerts over the shared sensor streams.

Two rules, each firing at most once per door-open episode:
  DoorWhileEmpty (High)  - armed room, door open, fused count zero.
  DoorLeftOpen  (Medium) - door continuously open for 5 minutes, armed or not.
"""

from dataclasses import dataclass
from typing import Optional

from ..bus import Bus

DOOR_WHILE_EMPTY = "DoorWhileEmpty"
DOOR_LEFT_OPEN = "DoorLeftOpen"
RULE_SEVERITY = {DOOR_WHILE_EMPTY: "High", DOOR_LEFT_OPEN: "Medium"}
DEFAULT_LEFT_OPEN_MS = 5 * 60_000


@dataclass(frozen=True)
class Alert:
    rule: str
    severity: str
    room_id: str
    ts_ms: int
    detail: str

    def __post_init__(self):
        if RULE_SEVERITY.get(self.rule) != self.severity:
            raise ValueError(f"severity {self.severity!r} wrong for rule {self.rule!r}")


def evaluate_security(armed: bool, door_open: bool, count: int,
                      open_duration_ms: int, fired=(),
                      left_open_ms: int = DEFAULT_LEFT_OPEN_MS) -> Optional[str]:
    """Decide which rule (if any) triggers now; `fired` are this episode's rules."""
    if not door_open:
        return None
    if armed and count == 0 and DOOR_WHILE_EMPTY not in fired:
        return DOOR_WHILE_EMPTY
    if open_duration_ms >= left_open_ms and DOOR_LEFT_OPEN not in fired:
        return DOOR_LEFT_OPEN
    return None


class _RoomWatch:
    __slots__ = ("armed", "open_since", "fired", "count")

    def __init__(self):
        self.armed = False
        self.open_since: Optional[int] = None
        self.fired: set[str] = set()
        self.count = 0


class SecurityApp:
    """Bus service 'security' with arm/disarm ops; publishes to topic 'alerts'."""

    name = "security"

    def __init__(self, bus: Bus, room_ids, left_open_ms: int = DEFAULT_LEFT_OPEN_MS):
        self.bus = bus
        self.left_open_ms = left_open_ms
        self.rooms = {r: _RoomWatch() for r in room_ids}
        self.alerts: list[Alert] = []
        self._sub_readings = bus.subscribe("readings.*", self._on_reading)
        self._sub_occ = bus.subscribe("occupancy.*", self._on_occupancy)
        self._reg = bus.register(self.name, {"arm", "disarm", "status"}, self._handle)

    def close(self) -> None:
        self._sub_readings.close()
        self._sub_occ.close()
        self._reg.close()

    def _handle(self, operation: str, payload):
        payload = payload or {}
        targets = [payload["room"]] if payload.get("room") else list(self.rooms)
        for room in targets:
            if room not in self.rooms:
                raise KeyError(f"unknown room {room!r}")
            if operation == "arm":
                self.rooms[room].armed = True
            elif operation == "disarm":
                self.rooms[room].armed = False
        return {"armed": {r: w.armed for r, w in self.rooms.items()}}

    def _on_occupancy(self, topic: str, payload) -> None:
        room = payload.get("room")
        watch = self.rooms.get(room)
        if watch is None:
            return
        watch.count = payload["count"]
        self._evaluate(room, payload["ts"])

    def _on_reading(self, topic: str, payload) -> None:
        room = payload.get("room")
        watch = self.rooms.get(room)
        if watch is None:
            return
        ts = payload["ts"]
        if payload.get("kind") == "door":
            if payload["value"] >= 0.5:
                if watch.open_since is None:
                    watch.open_since = ts      # new episode
                    watch.fired = set()
                self._evaluate(room, ts, at_open=True)
            else:
                watch.open_since = None        # episode over
        else:
            # any reading advances this room's notion of time
            self._evaluate(room, ts)

    def _evaluate(self, room: str, ts: int, at_open: bool = False) -> None:
        watch = self.rooms[room]
        if watch.open_since is None:
            return
        count = watch.count
        if at_open:
            # was the room empty when the door opened? (same-instant counter
            # updates must not mask a break-in)
            pending = self.bus.request("occupancy", "estimate",
                                       {"room": room, "at": ts - 1}, timeout_ticks=10)
            if pending.ok:
                count = pending.value["count"]
        rule = evaluate_security(watch.armed, True, count, ts - watch.open_since,
                                 watch.fired, self.left_open_ms)
        if rule is None:
            return
        watch.fired.add(rule)
        alert = Alert(rule, RULE_SEVERITY[rule], room, ts,
                      f"door open {(ts - watch.open_since) // 1000}s, count={count}")
        self.alerts.append(alert)
        self.bus.publish("alerts", {
            "rule": alert.rule, "severity": alert.severity, "room": alert.room_id,
            "ts": alert.ts_ms, "detail": alert.detail,
        })
