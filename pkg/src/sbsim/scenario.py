"""Scenario files: the plain-text description of a simulated building.

Line grammar (order-insensitive between sections, '#' comments):

    room <id> temp=<f> t_env=<f> tau=<int> heater_w=<f> c=<f>
    node <id> room=<id> kinds=<csv> [mac=<hex>] [sigma=<f>] [period=<int>]
                                    [drives=heater|lamp] [lux_delta=<f>]
    event <tick> <room> enter|exit [mac=<hex>]
    profile <room> humidity|lux <tick>=<f> ...

period, drives and lux_delta are optional extensions beyond the core
grammar: period overrides the default 10-tick sampling cadence, drives
says what a relay actuates (default heater), lux_delta is the light a
lamp relay adds when on.
"""

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import ParseError, ValidationError

SENSOR_KINDS = ("temperature", "humidity", "luminance", "door",
                "presence-beacon", "people-counter", "relay")
MEASURING_KINDS = ("temperature", "humidity", "luminance")
DEFAULT_PERIOD_TICKS = 10
DEFAULT_LAMP_LUX = 350.0

MAC_RE = re.compile(r"^[0-9A-Fa-f]{2}(:[0-9A-Fa-f]{2}){5}$")

ENTER = "enter"
EXIT = "exit"


@dataclass(frozen=True)
class RoomSpec:
    room_id: str
    temp_c: float
    t_env_c: float
    tau_ticks: int
    heater_w: float
    c_j_per_k: float


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    room_id: str
    kinds: tuple[str, ...]
    mac: Optional[str] = None
    noise_sigma: float = 0.0
    period_ticks: int = DEFAULT_PERIOD_TICKS
    drives: Optional[str] = None      # relays only: heater | lamp
    lux_delta: float = DEFAULT_LAMP_LUX


@dataclass(frozen=True)
class OccupantEvent:
    at: int
    room_id: str
    kind: str  # enter | exit
    mac: Optional[str] = None


@dataclass
class Scenario:
    rooms: dict[str, RoomSpec] = field(default_factory=dict)
    nodes: dict[str, NodeSpec] = field(default_factory=dict)
    events: list[OccupantEvent] = field(default_factory=list)
    profiles: dict[tuple[str, str], tuple[tuple[int, float], ...]] = field(default_factory=dict)

    def nodes_in(self, room_id: str, kind: Optional[str] = None) -> list[NodeSpec]:
        out = [n for n in self.nodes.values() if n.room_id == room_id]
        if kind is not None:
            out = [n for n in out if kind in n.kinds]
        return out

    def heater_relay(self, room_id: str) -> Optional[NodeSpec]:
        for n in self.nodes_in(room_id, "relay"):
            if n.drives == "heater":
                return n
        return None

    def beacon_for(self, mac: str) -> Optional[NodeSpec]:
        for n in self.nodes.values():
            if "presence-beacon" in n.kinds and n.mac and n.mac.lower() == mac.lower():
                return n
        return None


def _attrs(parts: list[str], line_no: int) -> dict[str, str]:
    out = {}
    for part in parts:
        if "=" not in part:
            raise ParseError(line_no, f"expected key=value, got {part!r}")
        key, val = part.split("=", 1)
        if key in out:
            raise ParseError(line_no, f"duplicate attribute {key!r}")
        out[key] = val
    return out


def _num(attrs: dict, key: str, line_no: int, cast=float):
    if key not in attrs:
        raise ParseError(line_no, f"missing attribute {key}=")
    try:
        return cast(attrs[key])
    except ValueError:
        raise ParseError(line_no, f"bad number for {key}: {attrs[key]!r}") from None


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        if head == "room":
            if len(parts) < 2:
                raise ParseError(line_no, "room needs an id")
            attrs = _attrs(parts[2:], line_no)
            room = RoomSpec(
                room_id=parts[1],
                temp_c=_num(attrs, "temp", line_no),
                t_env_c=_num(attrs, "t_env", line_no),
                tau_ticks=_num(attrs, "tau", line_no, int),
                heater_w=_num(attrs, "heater_w", line_no),
                c_j_per_k=_num(attrs, "c", line_no),
            )
            if room.room_id in sc.rooms:
                raise ParseError(line_no, f"duplicate room {room.room_id!r}")
            sc.rooms[room.room_id] = room
        elif head == "node":
            if len(parts) < 2:
                raise ParseError(line_no, "node needs an id")
            attrs = _attrs(parts[2:], line_no)
            if "room" not in attrs or "kinds" not in attrs:
                raise ParseError(line_no, "node needs room= and kinds=")
            kinds = tuple(k.strip() for k in attrs["kinds"].split(",") if k.strip())
            node = NodeSpec(
                node_id=parts[1],
                room_id=attrs["room"],
                kinds=kinds,
                mac=attrs.get("mac"),
                noise_sigma=float(attrs["sigma"]) if "sigma" in attrs else 0.0,
                period_ticks=int(attrs["period"]) if "period" in attrs else DEFAULT_PERIOD_TICKS,
                drives=attrs.get("drives", "heater" if "relay" in kinds else None),
                lux_delta=float(attrs["lux_delta"]) if "lux_delta" in attrs else DEFAULT_LAMP_LUX,
            )
            if node.node_id in sc.nodes:
                raise ParseError(line_no, f"duplicate node {node.node_id!r}")
            sc.nodes[node.node_id] = node
        elif head == "event":
            if len(parts) < 4:
                raise ParseError(line_no, "event needs: event <tick> <room> enter|exit [mac=..]")
            try:
                tick = int(parts[1])
            except ValueError:
                raise ParseError(line_no, f"bad tick {parts[1]!r}") from None
            kind = parts[3]
            if kind not in (ENTER, EXIT):
                raise ParseError(line_no, f"event kind must be enter|exit, got {kind!r}")
            attrs = _attrs(parts[4:], line_no)
            sc.events.append(OccupantEvent(tick, parts[2], kind, attrs.get("mac")))
        elif head == "profile":
            if len(parts) < 4:
                raise ParseError(line_no, "profile needs: profile <room> humidity|lux <tick>=<f> ...")
            room_id, fieldname = parts[1], parts[2]
            if fieldname not in ("humidity", "lux"):
                raise ParseError(line_no, f"profile field must be humidity|lux, got {fieldname!r}")
            points = []
            for part in parts[3:]:
                if "=" not in part:
                    raise ParseError(line_no, f"expected <tick>=<value>, got {part!r}")
                t, v = part.split("=", 1)
                try:
                    points.append((int(t), float(v)))
                except ValueError:
                    raise ParseError(line_no, f"bad profile point {part!r}") from None
            sc.profiles[(room_id, fieldname)] = tuple(points)
        else:
            raise ParseError(line_no, f"unknown directive {head!r}")
    _validate(sc)
    return sc


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def _validate(sc: Scenario) -> None:
    if not sc.rooms:
        raise ValidationError("scenario declares no rooms")
    for room in sc.rooms.values():
        if room.tau_ticks <= 0:
            raise ValidationError(f"room {room.room_id!r}: tau must be positive")
        if room.c_j_per_k <= 0:
            raise ValidationError(f"room {room.room_id!r}: c must be positive")
        if room.heater_w < 0:
            raise ValidationError(f"room {room.room_id!r}: heater_w must be >= 0")
    for node in sc.nodes.values():
        if node.room_id not in sc.rooms:
            raise ValidationError(f"node {node.node_id!r} references missing room {node.room_id!r}")
        if not node.kinds:
            raise ValidationError(f"node {node.node_id!r} declares no kinds")
        for kind in node.kinds:
            if kind not in SENSOR_KINDS:
                raise ValidationError(f"node {node.node_id!r}: unknown kind {kind!r}")
        if "presence-beacon" in node.kinds and not node.mac:
            raise ValidationError(f"node {node.node_id!r}: presence-beacon requires mac=")
        if node.mac is not None and not MAC_RE.match(node.mac):
            raise ValidationError(f"node {node.node_id!r}: malformed mac {node.mac!r}")
        if node.noise_sigma < 0:
            raise ValidationError(f"node {node.node_id!r}: sigma must be >= 0")
        if node.period_ticks < 1:
            raise ValidationError(f"node {node.node_id!r}: period must be >= 1")
        if "relay" in node.kinds and node.drives not in ("heater", "lamp"):
            raise ValidationError(f"node {node.node_id!r}: drives must be heater|lamp")
    last_tick = None
    present: dict[str, dict] = {r: {"anon": 0, "macs": set()} for r in sc.rooms}
    for ev in sc.events:
        if ev.room_id not in sc.rooms:
            raise ValidationError(f"event at tick {ev.at} references missing room {ev.room_id!r}")
        if ev.at < 0:
            raise ValidationError(f"event at tick {ev.at}: negative tick")
        if last_tick is not None and ev.at < last_tick:
            raise ValidationError(f"events out of tick order at tick {ev.at}")
        last_tick = ev.at
        if ev.mac is not None and not MAC_RE.match(ev.mac):
            raise ValidationError(f"event at tick {ev.at}: malformed mac {ev.mac!r}")
        slot = present[ev.room_id]
        if ev.kind == ENTER:
            if ev.mac:
                if ev.mac in slot["macs"]:
                    raise ValidationError(f"event at tick {ev.at}: mac {ev.mac} already present")
                slot["macs"].add(ev.mac)
            else:
                slot["anon"] += 1
        else:
            if ev.mac:
                if ev.mac not in slot["macs"]:
                    raise ValidationError(f"event at tick {ev.at}: exit for absent mac {ev.mac}")
                slot["macs"].discard(ev.mac)
            else:
                if slot["anon"] <= 0:
                    raise ValidationError(f"event at tick {ev.at}: exit from empty room {ev.room_id!r}")
                slot["anon"] -= 1
    for (room_id, fieldname), points in sc.profiles.items():
        if room_id not in sc.rooms:
            raise ValidationError(f"profile references missing room {room_id!r}")
        ticks = [t for t, _ in points]
        if ticks != sorted(ticks):
            raise ValidationError(f"profile {fieldname} for {room_id!r}: ticks out of order")
        for t, v in points:
            if fieldname == "humidity" and not 0.0 <= v <= 100.0:
                raise ValidationError(f"profile humidity for {room_id!r}: {v} outside [0,100]")
            if fieldname == "lux" and v < 0.0:
                raise ValidationError(f"profile lux for {room_id!r}: negative value {v}")
