"""Physical world model: rooms, sensor nodes, occupants, relays.

Room temperature follows a first-order lumped model integrated by explicit
Euler, one tick at a time:

    dT per tick = (t_env - T)/tau_ticks + (heater_w*on + 90*occupants)*tick_s/C

Humidity and illuminance have no physics; they follow piecewise-constant
scheduled profiles plus sensor noise, and lamps add a configured lux delta.
Occupant enter/exit events synthesize door open/close pairs (one tick
apart, 5-tick debounce), people-counter increments, and start or stop the
RSSI presence stream for the occupant's MAC.
"""

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Optional

from . import kernels
from .clock import LogicalClock
from .errors import NodeUnknown, NotARelay, RoomUnknown
from .rng import substream
from .scenario import ENTER, DEFAULT_PERIOD_TICKS, NodeSpec, OccupantEvent, Scenario

KIND_UNITS = {
    "temperature": "celsius",
    "humidity": "pct_rh",
    "luminance": "lux",
    "door": "bool",
    "people-counter": "count",
    "presence-beacon": "dbm",
}
SAMPLED_KINDS = ("temperature", "humidity", "luminance", "presence-beacon")

OCCUPANT_WATTS = 90.0
RSSI_IN_ROOM_DBM = -60.0
DOOR_DEBOUNCE_TICKS = 5
DEFAULT_HUMIDITY_PCT = 45.0
DEFAULT_LUX = 200.0

AUTO = "auto"
MANUAL = "manual"


@dataclass(frozen=True, slots=True)
class Reading:
    at: Optional[int]      # tick; None for rows imported from foreign CSVs
    ts_ms: int
    node_id: str
    kind: str
    value: float
    unit: str


@dataclass(frozen=True, slots=True)
class ActuationCommand:
    at: int
    ts_ms: int
    node_id: str
    room_id: str
    on: bool
    source: str  # auto | manual


@dataclass
class RoomState:
    room_id: str
    temp_c: float
    t_env_c: float
    tau_ticks: int
    heater_w: float
    c_j_per_k: float
    occupants: int = 0


class World:
    """Single-owner building world advanced on the shared logical clock.

    Standalone use: step(dt) advances the clock, fires scheduled occupant
    events and (with auto_sample) emits readings at each node's period.
    Composed use (the runtime): the driver owns the clock and calls
    integrate_to / fire_due itself, sampling through sensor subscriptions.
    """

    def __init__(self, scenario: Scenario, seed: int = 0,
                 clock: Optional[LogicalClock] = None, auto_sample: bool = True):
        self.scenario = scenario
        self.seed = seed
        self.clock = clock if clock is not None else LogicalClock()
        self.auto_sample = auto_sample
        self.rooms = {
            rid: RoomState(rid, rs.temp_c, rs.t_env_c, rs.tau_ticks, rs.heater_w, rs.c_j_per_k)
            for rid, rs in scenario.rooms.items()
        }
        self.relay_state: dict[str, bool] = {
            n.node_id: False for n in scenario.nodes.values() if "relay" in n.kinds
        }
        self._noise = {n: substream(seed, "noise", n) for n in scenario.nodes}
        self._present: dict[str, set[str]] = {rid: set() for rid in scenario.rooms}
        self._events = list(scenario.events)
        self._event_idx = 0
        self._therm_tick = 0
        self._last_door_pair: dict[str, int] = {}
        self._order = itertools.count()
        self._samples: list = []  # (due, node_id, order)
        if auto_sample:
            for node in scenario.nodes.values():
                if any(k in SAMPLED_KINDS for k in node.kinds):
                    heapq.heappush(self._samples,
                                   (node.period_ticks, node.node_id, next(self._order)))

    # -- lookups ---------------------------------------------------------------

    def _node(self, node_id: str) -> NodeSpec:
        try:
            return self.scenario.nodes[node_id]
        except KeyError:
            raise NodeUnknown(node_id) from None

    def _room(self, room_id: str) -> RoomState:
        try:
            return self.rooms[room_id]
        except KeyError:
            raise RoomUnknown(room_id) from None

    def present_macs(self, room_id: str) -> frozenset:
        return frozenset(self._present[self._room(room_id).room_id])

    def _profile_value(self, room_id: str, fieldname: str, tick: int) -> float:
        points = self.scenario.profiles.get((room_id, fieldname))
        default = DEFAULT_HUMIDITY_PCT if fieldname == "humidity" else DEFAULT_LUX
        if not points:
            return default
        value = default
        for t, v in points:
            if t <= tick:
                value = v
            else:
                break
        return value

    def room_truth(self, room_id: str, kind: str, tick: Optional[int] = None) -> float:
        """Noise-free physical value for a room quantity at a tick."""
        t = self.clock.now if tick is None else tick
        room = self._room(room_id)
        if kind == "temperature":
            return room.temp_c
        if kind == "humidity":
            return self._profile_value(room_id, "humidity", t)
        if kind == "luminance":
            lux = self._profile_value(room_id, "lux", t)
            for n in self.scenario.nodes_in(room_id, "relay"):
                if n.drives == "lamp" and self.relay_state[n.node_id]:
                    lux += n.lux_delta
            return max(lux, 0.0)
        raise ValueError(f"no physical truth for kind {kind!r}")

    def _heater_on(self, room_id: str) -> bool:
        relay = self.scenario.heater_relay(room_id)
        return bool(relay and self.relay_state[relay.node_id])

    # -- dynamics ----------------------------------------------------------------

    def integrate_to(self, tick: int) -> None:
        """Advance room thermal state through `tick` (inputs held constant)."""
        n = tick - self._therm_tick
        if n < 0:
            raise ValueError("cannot integrate backwards")
        if n == 0:
            return
        tick_s = self.clock.tick_seconds
        for room in self.rooms.values():
            watts = (room.heater_w if self._heater_on(room.room_id) else 0.0)
            watts += OCCUPANT_WATTS * room.occupants
            room.temp_c = kernels.thermal_advance(
                room.temp_c, room.t_env_c, float(room.tau_ticks),
                watts, room.c_j_per_k, tick_s, n)
        self._therm_tick = tick

    def next_event_tick(self) -> Optional[int]:
        if self._event_idx < len(self._events):
            return self._events[self._event_idx].at
        return None

    def fire_due(self, tick: int) -> list:
        """Apply all scheduled occupant events with at <= tick."""
        effects: list = []
        while self._event_idx < len(self._events) and self._events[self._event_idx].at <= tick:
            ev = self._events[self._event_idx]
            self._event_idx += 1
            effects.append(ev)
            effects.extend(self.apply_occupant_event(ev))
        return effects

    def apply_occupant_event(self, ev: OccupantEvent) -> list[Reading]:
        """Adjust occupancy and emit the event's sensor effects.

        Door open/close (one tick apart) when the room has a door node,
        a +-1 people-counter reading, and presence-stream start/stop for
        the MAC. Door pairs within the debounce window are suppressed.
        """
        room = self._room(ev.room_id)
        readings: list[Reading] = []
        if ev.kind == ENTER:
            room.occupants += 1
            if ev.mac:
                self._present[room.room_id].add(ev.mac)
        else:
            room.occupants = max(0, room.occupants - 1)
            if ev.mac:
                self._present[room.room_id].discard(ev.mac)
        door = next(iter(self.scenario.nodes_in(room.room_id, "door")), None)
        if door is not None:
            last = self._last_door_pair.get(room.room_id)
            if last is None or ev.at - last >= DOOR_DEBOUNCE_TICKS:
                self._last_door_pair[room.room_id] = ev.at
                readings.append(self._reading(ev.at, door.node_id, "door", 1.0))
                readings.append(self._reading(ev.at + 1, door.node_id, "door", 0.0))
        counter = next(iter(self.scenario.nodes_in(room.room_id, "people-counter")), None)
        if counter is not None:
            delta = 1.0 if ev.kind == ENTER else -1.0
            readings.append(self._reading(ev.at, counter.node_id, "people-counter", delta))
        return readings

    def _reading(self, at: int, node_id: str, kind: str, value: float) -> Reading:
        return Reading(at, self.clock.ts_ms(at), node_id, kind, value, KIND_UNITS[kind])

    def sample_sensor(self, node_id: str, kind: Optional[str] = None) -> Optional[Reading]:
        """One reading = physical truth + seeded Gaussian(0, sigma).

        A presence-beacon whose MAC is not in the room yields None (the
        tracker is silent while its wearer is away). Humidity clamps to
        [0,100] and lux to >= 0 after noise.
        """
        node = self._node(node_id)
        if kind is None:
            sampleable = [k for k in node.kinds if k in SAMPLED_KINDS]
            if len(sampleable) != 1:
                raise ValueError(f"node {node_id!r} needs an explicit kind (has {node.kinds})")
            kind = sampleable[0]
        if kind not in node.kinds or kind not in SAMPLED_KINDS:
            raise ValueError(f"node {node_id!r} cannot sample kind {kind!r}")
        at = self.clock.now
        if kind == "presence-beacon":
            if node.mac not in self._present[node.room_id]:
                return None
            truth = RSSI_IN_ROOM_DBM
        else:
            truth = self.room_truth(node.room_id, kind, at)
        value = truth + node.noise_sigma * self._noise[node_id].standard_normal()
        if kind == "humidity":
            value = min(max(value, 0.0), 100.0)
        elif kind == "luminance":
            value = max(value, 0.0)
        elif kind == "presence-beacon":
            value = min(value, 0.0)  # RSSI is never positive
        return self._reading(at, node_id, kind, value)

    def set_relay(self, node_id: str, on: bool, source: str = MANUAL) -> ActuationCommand:
        """Set a relay; a heater relay's power takes effect from the next tick."""
        node = self._node(node_id)
        if "relay" not in node.kinds:
            raise NotARelay(node_id)
        if source not in (AUTO, MANUAL):
            raise ValueError(f"source must be auto|manual, got {source!r}")
        self.relay_state[node_id] = bool(on)
        now = self.clock.now
        return ActuationCommand(now, self.clock.ts_ms(now), node_id, node.room_id,
                                bool(on), source)

    # -- standalone driver -------------------------------------------------------

    def _next_sample_due(self) -> Optional[int]:
        return self._samples[0][0] if self._samples else None

    def next_activity(self) -> Optional[int]:
        candidates = [t for t in (self.next_event_tick(), self._next_sample_due())
                      if t is not None]
        return min(candidates) if candidates else None

    def step(self, dt_ticks: int) -> list:
        """Advance the world dt_ticks; return Reading/OccupantEvent effects."""
        if dt_ticks < 1:
            raise ValueError("dt_ticks must be >= 1")
        target = self.clock.now + dt_ticks
        effects: list = list(self.fire_due(self.clock.now))  # events at the current tick
        while self.clock.now < target:
            candidates = [target]
            nxt = self.next_activity()
            if nxt is not None and nxt > self.clock.now:
                candidates.append(nxt)
            t = min(candidates)
            self.integrate_to(t)
            self.clock.advance_to(t)
            effects.extend(self.fire_due(t))
            while self._samples and self._samples[0][0] <= t:
                due, node_id, _ = heapq.heappop(self._samples)
                node = self.scenario.nodes[node_id]
                for k in node.kinds:
                    if k in SAMPLED_KINDS:
                        r = self.sample_sensor(node_id, k)
                        if r is not None:
                            effects.append(r)
                heapq.heappush(self._samples, (due + node.period_ticks, node_id, next(self._order)))
        return effects


def build_world(scenario: Scenario, seed: int = 0,
                clock: Optional[LogicalClock] = None, auto_sample: bool = True) -> World:
    """World at tick 0 with rooms at their initial temperatures."""
    return World(scenario, seed=seed, clock=clock, auto_sample=auto_sample)


def is_finite(value: float) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
