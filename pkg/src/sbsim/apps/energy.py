"""Energy management: hysteresis thermostat, absence setback, savings math.

The thermostat turns the heater on below setpoint - hysteresis and off
above setpoint + hysteresis, emitting a command only on transitions.
Detected absence (fused count zero for the setback delay) drops the
setpoint to the setback value; any presence restores comfort immediately.

Savings are measured against a counterfactual baseline: the identical
scenario and seed re-simulated with setback disabled.
"""

from dataclasses import dataclass, replace
from typing import Optional

from ..bus import Bus

COMFORT = "Comfort"
SETBACK = "Setback"

SETPOINT_MIN_C = 5.0
SETPOINT_MAX_C = 30.0

MS_PER_HOUR = 3_600_000.0
J_PER_KWH = 3.6e6


@dataclass(frozen=True)
class ThermostatConfig:
    comfort_c: float = 22.0
    setback_c: float = 17.0
    hysteresis_c: float = 0.5
    setback_delay_ms: int = 10 * 60_000


@dataclass(frozen=True)
class ThermostatState:
    room_id: str
    setpoint_c: float
    hysteresis_c: float
    heater_on: bool = False
    mode: str = COMFORT

    def __post_init__(self):
        if self.hysteresis_c <= 0:
            raise ValueError("hysteresis must be > 0")
        if not SETPOINT_MIN_C <= self.setpoint_c <= SETPOINT_MAX_C:
            raise ValueError(f"setpoint {self.setpoint_c} outside safe band "
                             f"[{SETPOINT_MIN_C}, {SETPOINT_MAX_C}]")


def thermostat_step(st: ThermostatState, temp_c: float) -> tuple[ThermostatState, Optional[bool]]:
    """Returns (new state, heater command) with command None inside the band."""
    if temp_c < st.setpoint_c - st.hysteresis_c and not st.heater_on:
        return replace(st, heater_on=True), True
    if temp_c > st.setpoint_c + st.hysteresis_c and st.heater_on:
        return replace(st, heater_on=False), False
    return st, None


def occupancy_setback(st: ThermostatState, count: int, absent_for_ms: int,
                      cfg: ThermostatConfig) -> ThermostatState:
    """Apply the absence rule: setback after the delay, comfort on presence."""
    if count > 0:
        if st.mode != COMFORT:
            return replace(st, mode=COMFORT, setpoint_c=cfg.comfort_c)
        return st
    if absent_for_ms >= cfg.setback_delay_ms and st.mode != SETBACK:
        return replace(st, mode=SETBACK, setpoint_c=cfg.setback_c)
    return st


@dataclass(frozen=True)
class SavingsReport:
    room_id: str
    from_ms: int
    to_ms: int
    baseline_kwh: float
    actual_kwh: float
    saved_kwh: float
    setback_hours: float


def heater_on_ms(commands: list[tuple[int, bool]], from_ms: int, to_ms: int) -> int:
    """Total heater-on milliseconds within [from, to) given (ts, on) transitions."""
    total = 0
    on_since: Optional[int] = None
    for ts, on in commands:
        if on and on_since is None:
            on_since = ts
        elif not on and on_since is not None:
            total += _overlap(on_since, ts, from_ms, to_ms)
            on_since = None
    if on_since is not None:
        total += _overlap(on_since, to_ms, from_ms, to_ms)
    return total


def _overlap(a0: int, a1: int, b0: int, b1: int) -> int:
    return max(0, min(a1, b1) - max(a0, b0))


def span_in_mode(mode_log: list[tuple[int, str]], mode: str,
                 from_ms: int, to_ms: int) -> int:
    """Milliseconds spent in `mode` within [from, to); log entries are (ts, mode)."""
    total = 0
    for i, (ts, m) in enumerate(mode_log):
        end = mode_log[i + 1][0] if i + 1 < len(mode_log) else to_ms
        if m == mode:
            total += _overlap(ts, end, from_ms, to_ms)
    return total


def kwh(on_ms: int, watts: float) -> float:
    return watts * (on_ms / 1000.0) / J_PER_KWH


def build_report(room_id: str, from_ms: int, to_ms: int, watts: float,
                 actual_cmds: list[tuple[int, bool]],
                 baseline_cmds: list[tuple[int, bool]],
                 mode_log: list[tuple[int, str]]) -> SavingsReport:
    actual = kwh(heater_on_ms(actual_cmds, from_ms, to_ms), watts)
    baseline = kwh(heater_on_ms(baseline_cmds, from_ms, to_ms), watts)
    setback_h = span_in_mode(mode_log, SETBACK, from_ms, to_ms) / MS_PER_HOUR
    return SavingsReport(room_id, from_ms, to_ms, baseline, actual,
                         baseline - actual, setback_h)


class EnergyApp:
    """Bus service driving one thermostat per room that has a heater relay."""

    name = "energy"

    def __init__(self, bus: Bus, heater_relays: dict[str, str],
                 cfg: Optional[ThermostatConfig] = None,
                 setback_enabled: bool = True, start_ms: int = 0):
        self.bus = bus
        self.cfg = cfg or ThermostatConfig()
        self.setback_enabled = setback_enabled
        self.relays = dict(heater_relays)  # room_id -> relay node_id
        self._room_of_relay = {node: room for room, node in self.relays.items()}
        self.states = {
            room: ThermostatState(room, self.cfg.comfort_c, self.cfg.hysteresis_c)
            for room in self.relays
        }
        self.last_occupied_ms = {room: start_ms for room in self.relays}
        self.mode_log = {room: [(start_ms, COMFORT)] for room in self.relays}
        self._sub = bus.subscribe("readings.*", self._on_reading)
        # heater_on tracks the *applied* relay state, fed back over the bus;
        # a manually held relay must keep the thermostat re-requesting
        self._act_sub = bus.subscribe("actuation.*", self._on_actuation)
        self._reg = bus.register(self.name, {"status"}, self._handle)

    def close(self) -> None:
        self._sub.close()
        self._act_sub.close()
        self._reg.close()

    def _on_actuation(self, topic: str, payload) -> None:
        room = self._room_of_relay.get(payload.get("node"))
        if room is not None:
            self.states[room] = replace(self.states[room], heater_on=bool(payload["on"]))

    def _handle(self, operation: str, payload):
        room = (payload or {}).get("room")
        if room not in self.states:
            raise KeyError(f"no thermostat for room {room!r}")
        st = self.states[room]
        return {"room": room, "setpoint_c": st.setpoint_c, "mode": st.mode,
                "heater_on": st.heater_on}

    def _on_reading(self, topic: str, payload) -> None:
        if payload.get("kind") != "temperature":
            return
        room = payload.get("room")
        if room not in self.states:
            return
        at_ms = payload["ts"]
        st = self.states[room]
        if self.setback_enabled:
            pending = self.bus.request("occupancy", "estimate",
                                       {"room": room, "at": at_ms}, timeout_ticks=10)
            if pending.ok:
                count = pending.value["count"]
                if count > 0:
                    self.last_occupied_ms[room] = at_ms
                absent_for = at_ms - self.last_occupied_ms[room]
                st = occupancy_setback(st, count, absent_for, self.cfg)
                if st.mode != self.states[room].mode:
                    self.mode_log[room].append((at_ms, st.mode))
        stepped, command = thermostat_step(st, payload["value"])
        # keep setpoint/mode changes, but let the applied-actuation feedback
        # own heater_on: a suppressed command must be retried, not assumed
        self.states[room] = replace(stepped, heater_on=st.heater_on)
        if command is not None:
            self.bus.notify("actuation", "set",
                            {"node": self.relays[room], "on": command, "source": "auto"})
