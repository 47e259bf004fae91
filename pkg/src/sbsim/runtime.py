"""Composition root: one process hosting the whole desk-scale platform.

Wiring (everything shares one logical clock and one seed):

    world (rooms, occupants, relays)
      -> BLE link: periodic temperature/humidity/luminance notifications
      -> Z-Wave link: door, people-counter, presence-beacon events
      -> hub: delivered frames published on bus topics readings.<room>.<kind>
          -> store (append), occupancy (fuse + publish occupancy.<room>),
             energy / security / comfort apps
          -> actuation service (manual-hold arbitration) -> world relays

The runner advances in windows bounded by the next interesting tick
(occupant event, notification due, frame delivery, bus deadline), with
room thermal state integrated through each window by the compiled kernel.
"""

import hashlib
import heapq
import json
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .apps.comfort import ComfortApp
from .apps.energy import (COMFORT, EnergyApp, SavingsReport, ThermostatConfig,
                          build_report)
from .apps.security import DEFAULT_LEFT_OPEN_MS, SecurityApp
from .building import AUTO, MANUAL, ActuationCommand, Reading, World
from .bus import Bus
from .clock import DEFAULT_EPOCH_MS, DEFAULT_TICK_MS, LogicalClock, iso_utc
from .errors import NoData
from .occupancy import (DEFAULT_LEASE_MS, DEFAULT_MIN_GAP_MS, OccupancyTracker,
                        PresenceSighting)
from .scenario import Scenario, load_scenario
from .store import RangeQuery, TimeSeriesStore, fmt_value
from .transport import LinkFlavor, LinkSpec, TransportNet

BLE_WIRED_KINDS = ("temperature", "humidity", "luminance")
ZWAVE_WIRED_KINDS = ("door", "people-counter", "presence-beacon")

ACTUATION_HEADER = "timestamp,node_id,room_id,state,source"
ALERTS_HEADER = "timestamp,rule,severity,room_id,detail"
REPORT_HEADER = "room_id,from,to,baseline_kwh,actual_kwh,saved_kwh,setback_hours"
ABSENCE_HEADER = "room_id,start,end"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 1
    tick_ms: int = DEFAULT_TICK_MS
    epoch_ms: int = DEFAULT_EPOCH_MS
    ble: LinkSpec = LinkSpec("ble0", LinkFlavor.BLE, 0.0, 0)
    zwave: LinkSpec = LinkSpec("zw0", LinkFlavor.ZWAVE, 0.0, 1)
    thermostat: ThermostatConfig = field(default_factory=ThermostatConfig)
    lease_ms: int = DEFAULT_LEASE_MS
    min_gap_ms: int = DEFAULT_MIN_GAP_MS
    left_open_ms: int = DEFAULT_LEFT_OPEN_MS
    manual_hold_ms: int = 15 * 60_000
    setback_enabled: bool = True
    apps: tuple[str, ...] = ("energy", "security", "comfort")
    request_timeout_ticks: int = 50


class Runtime:
    def __init__(self, scenario: Scenario, config: Optional[RunConfig] = None):
        self.config = config or RunConfig()
        cfg = self.config
        self.scenario = scenario
        self.clock = LogicalClock(cfg.tick_ms, cfg.epoch_ms)
        self.world = World(scenario, seed=cfg.seed, clock=self.clock, auto_sample=False)
        self.bus = Bus(self.clock)
        self.store = TimeSeriesStore()
        self.lock = threading.RLock()  # serializes advance vs. gateway calls
        self._started = False

        self.net = TransportNet(seed=cfg.seed)
        self.net.add_link(cfg.ble)
        self.net.add_link(cfg.zwave)
        self._room_of_node = {n.node_id: n.room_id for n in scenario.nodes.values()}
        self._beacons: list = []  # (due_tick, node_id)
        self._wire_nodes()

        self.tracker = OccupancyTracker(list(scenario.rooms), lease_ms=cfg.lease_ms)
        for node in scenario.nodes.values():
            if "door" in node.kinds or "people-counter" in node.kinds:
                self.tracker.bind_node(node.node_id, node.room_id)

        self.actuation_log: list[ActuationCommand] = []
        self.alerts_log: list[dict] = []
        self.occupant_log: list = []
        self.suppressed_autos = 0
        self._hold_until_ms: dict[str, int] = {}

        # subscriber order fixes intra-tick processing order: store first,
        # then occupancy (which republishes), then the apps
        self._store_sub = self.bus.subscribe("readings.*", self._store_reading)
        self._occ_sub = self.bus.subscribe("readings.*", self._occupancy_reading)
        self._occ_reg = self.bus.register(
            "occupancy", {"estimate", "present", "absence"}, self._handle_occupancy)
        self._act_reg = self.bus.register("actuation", {"set"}, self._handle_actuation)
        self._alerts_sub = self.bus.subscribe("alerts", self._collect_alert)

        self.energy: Optional[EnergyApp] = None
        self.security: Optional[SecurityApp] = None
        self.comfort: Optional[ComfortApp] = None
        if "energy" in cfg.apps:
            heater_relays = {}
            for room_id in scenario.rooms:
                relay = scenario.heater_relay(room_id)
                if relay is not None:
                    heater_relays[room_id] = relay.node_id
            self.energy = EnergyApp(self.bus, heater_relays, cfg.thermostat,
                                    setback_enabled=cfg.setback_enabled,
                                    start_ms=cfg.epoch_ms)
        if "security" in cfg.apps:
            self.security = SecurityApp(self.bus, list(scenario.rooms),
                                        left_open_ms=cfg.left_open_ms)
        if "comfort" in cfg.apps:
            self.comfort = ComfortApp(self.bus)

    # -- wiring ------------------------------------------------------------------

    def _wire_nodes(self) -> None:
        cfg = self.config
        for node in self.scenario.nodes.values():
            self.net.add_node(node.node_id)
            ble_kinds = [k for k in node.kinds if k in BLE_WIRED_KINDS]
            if ble_kinds:
                conn = self.net.connect_ble(cfg.ble.link_id, node.node_id)
                for kind in ble_kinds:
                    self.net.subscribe_ble(conn, kind, node.period_ticks,
                                           source=self._sampler(node.node_id, kind))
            if any(k in ZWAVE_WIRED_KINDS for k in node.kinds):
                self.net.register_zwave(cfg.zwave.link_id, node.node_id)
            if "presence-beacon" in node.kinds:
                heapq.heappush(self._beacons, (node.period_ticks, node.node_id))

    def _sampler(self, node_id: str, kind: str):
        def sample(tick: int):
            r = self.world.sample_sensor(node_id, kind)
            return None if r is None else self._payload(r)
        return sample

    def _payload(self, r: Reading) -> dict:
        return {"ts": r.ts_ms, "tick": r.at, "node": r.node_id,
                "room": self._room_of_node.get(r.node_id, ""), "kind": r.kind,
                "value": r.value, "unit": r.unit}

    # -- bus handlers ----------------------------------------------------------------

    def _store_reading(self, topic: str, payload) -> None:
        self.store.append(Reading(payload["tick"], payload["ts"], payload["node"],
                                  payload["kind"], payload["value"], payload["unit"]))

    def _occupancy_reading(self, topic: str, payload) -> None:
        kind = payload["kind"]
        room = payload["room"]
        if kind in ("people-counter", "door"):
            est = self.tracker.update(
                Reading(payload["tick"], payload["ts"], payload["node"],
                        kind, payload["value"], payload["unit"]))
        elif kind == "presence-beacon":
            mac = self.scenario.nodes[payload["node"]].mac
            est = self.tracker.update(
                PresenceSighting(mac, room, payload["ts"], payload["value"]))
        else:
            return
        self.bus.publish(f"occupancy.{room}", {
            "room": room, "ts": est.ts_ms, "count": est.count,
            "macs": sorted(est.known_macs), "confidence": est.confidence,
        })

    def _handle_occupancy(self, operation: str, payload):
        room = payload["room"]
        at = payload.get("at", self.clock.ts_ms())
        if operation == "estimate":
            est = self.tracker.current_estimate(room, at)
            return {"room": room, "ts": est.ts_ms, "count": est.count,
                    "macs": sorted(est.known_macs), "confidence": est.confidence}
        if operation == "present":
            return {"room": room, "macs": sorted(self.tracker.present_macs(room, at))}
        intervals = self.tracker.absence_intervals(
            room, payload["from"], payload["to"],
            payload.get("min_gap_ms", self.config.min_gap_ms))
        return {"room": room,
                "intervals": [{"start": iv.start_ms, "end": iv.end_ms} for iv in intervals]}

    def _handle_actuation(self, operation: str, payload):
        node = payload["node"]
        on = bool(payload["on"])
        source = payload.get("source", MANUAL)
        now_ms = self.clock.ts_ms()
        if source == AUTO and now_ms < self._hold_until_ms.get(node, -1):
            self.suppressed_autos += 1
            return {"applied": False, "held": True, "node": node, "on": on}
        if source == MANUAL:
            self._hold_until_ms[node] = now_ms + self.config.manual_hold_ms
        current = self.world.relay_state.get(node)
        cmd = self.world.set_relay(node, on, source)
        if current != on:  # the log keeps transitions only
            self.actuation_log.append(cmd)
            self.bus.publish(f"actuation.{cmd.room_id}", {
                "ts": cmd.ts_ms, "node": cmd.node_id, "room": cmd.room_id,
                "on": cmd.on, "source": cmd.source,
            })
        return {"applied": True, "held": False, "node": node, "on": on,
                "hold_until": self._hold_until_ms.get(node)}

    def _collect_alert(self, topic: str, payload) -> None:
        self.alerts_log.append(payload)

    # -- the drive loop -----------------------------------------------------------------

    def advance(self, n_ticks: int) -> None:
        """Run the platform n_ticks forward, deterministic per (scenario, seed)."""
        with self.lock:
            target = self.clock.now + n_ticks
            if not self._started:
                self._started = True
                self._process_tick(self.clock.now)
            while self.clock.now < target:
                t = self._next_tick(target)
                self.world.integrate_to(t)
                self.clock.advance_to(t)
                self._process_tick(t)

    def advance_hours(self, hours: float) -> None:
        self.advance(round(hours * 3_600_000 / self.config.tick_ms))

    def _next_tick(self, target: int) -> int:
        now = self.clock.now
        t = target
        for cand in (self.world.next_event_tick(),
                     self._beacons[0][0] if self._beacons else None,
                     self.net.next_activity(),
                     self.bus.next_deadline()):
            if cand is not None and now < cand < t:
                t = cand
        return t

    def _process_tick(self, t: int) -> None:
        for effect in self.world.fire_due(t):
            if isinstance(effect, Reading):
                self.net.emit_zwave_event(self.config.zwave.link_id, effect.node_id,
                                          self._payload(effect), at=effect.at)
            else:
                self.occupant_log.append(effect)
        while self._beacons and self._beacons[0][0] <= t:
            due, node_id = heapq.heappop(self._beacons)
            r = self.world.sample_sensor(node_id, "presence-beacon")
            if r is not None:
                self.net.emit_zwave_event(self.config.zwave.link_id, node_id,
                                          self._payload(r), at=due)
            heapq.heappush(self._beacons,
                           (due + self.scenario.nodes[node_id].period_ticks, node_id))
        for frame in self.net.advance(max(t - self.net.now, 0)):
            payload = frame.payload
            self.bus.publish(f"readings.{payload['room']}.{payload['kind']}", payload)
        self.bus.process_due(t)

    # -- reports ------------------------------------------------------------------------

    def relay_transitions(self, node_id: str) -> list[tuple[int, bool]]:
        return [(c.ts_ms, c.on) for c in self.actuation_log if c.node_id == node_id]

    def energy_report(self, room_id: str, from_ms: Optional[int] = None,
                      to_ms: Optional[int] = None,
                      baseline: Optional["Runtime"] = None) -> SavingsReport:
        """Savings vs. the counterfactual baseline (same run, setback disabled)."""
        relay = self.scenario.heater_relay(room_id)
        if relay is None:
            raise NoData(f"room {room_id!r} has no heater relay")
        if self.energy is None:
            raise NoData("energy app is not running")
        from_ms = self.config.epoch_ms if from_ms is None else from_ms
        to_ms = self.clock.ts_ms() if to_ms is None else to_ms
        if baseline is None:
            baseline = self.baseline_run()
        room = self.scenario.rooms[room_id]
        return build_report(room_id, from_ms, to_ms, room.heater_w,
                            self.relay_transitions(relay.node_id),
                            baseline.relay_transitions(relay.node_id),
                            self.energy.mode_log[room_id])

    def baseline_run(self) -> "Runtime":
        """Re-simulate the identical scenario/seed with setback pinned off."""
        cfg = replace(self.config, setback_enabled=False)
        other = Runtime(self.scenario, cfg)
        other.advance(self.clock.now)
        return other


def simulate(scenario: Scenario, config: Optional[RunConfig] = None,
             duration_ticks: int = 0) -> Runtime:
    rt = Runtime(scenario, config)
    if duration_ticks > 0:
        rt.advance(duration_ticks)
    return rt


# -- artifacts ---------------------------------------------------------------------------


def render_report_text(report: SavingsReport, intervals) -> str:
    lines = [
        f"energy report: room={report.room_id} "
        f"range={iso_utc(report.from_ms)}..{iso_utc(report.to_ms)}",
        f"  baseline_kwh={fmt_value(report.baseline_kwh)}",
        f"  actual_kwh={fmt_value(report.actual_kwh)}",
        f"  saved_kwh={fmt_value(report.saved_kwh)}",
        f"  setback_hours={fmt_value(report.setback_hours)}",
        "  absence intervals:",
    ]
    if not intervals:
        lines.append("    (none)")
    for iv in intervals:
        end = iso_utc(iv.end_ms) if iv.end_ms is not None else "open"
        lines.append(f"    {iso_utc(iv.start_ms)}..{end}")
    return "\n".join(lines) + "\n"


def render_report_csv(reports) -> str:
    lines = [REPORT_HEADER]
    for report in reports:
        lines.append(",".join([
            report.room_id, iso_utc(report.from_ms), iso_utc(report.to_ms),
            fmt_value(report.baseline_kwh), fmt_value(report.actual_kwh),
            fmt_value(report.saved_kwh), fmt_value(report.setback_hours),
        ]))
    return "\n".join(lines) + "\n"


def render_absence_csv(intervals_by_room) -> str:
    lines = [ABSENCE_HEADER]
    for room_id, intervals in intervals_by_room.items():
        for iv in intervals:
            end = iso_utc(iv.end_ms) if iv.end_ms is not None else ""
            lines.append(f"{room_id},{iso_utc(iv.start_ms)},{end}")
    return "\n".join(lines) + "\n"


def write_outputs(rt: Runtime, outdir: Path, scenario_bytes: bytes,
                  scenario_name: str) -> dict:
    """Write the run's artifact files; returns the manifest dict."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    end_ms = rt.clock.ts_ms()
    epoch_ms = rt.config.epoch_ms

    with open(outdir / "readings.csv", "w", encoding="utf-8", newline="") as fh:
        rt.store.export_csv(RangeQuery(epoch_ms, end_ms + 1), fh)

    lines = [ACTUATION_HEADER]
    for cmd in rt.actuation_log:
        state = "on" if cmd.on else "off"
        lines.append(f"{iso_utc(cmd.ts_ms)},{cmd.node_id},{cmd.room_id},{state},{cmd.source}")
    (outdir / "actuation.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = [ALERTS_HEADER]
    for alert in rt.alerts_log:
        lines.append(f"{iso_utc(alert['ts'])},{alert['rule']},{alert['severity']},"
                     f"{alert['room']},{alert['detail']}")
    (outdir / "alerts.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    intervals_by_room = {
        room_id: rt.tracker.absence_intervals(room_id, epoch_ms, end_ms,
                                              rt.config.min_gap_ms)
        for room_id in rt.scenario.rooms
    }
    reports = []
    if rt.energy is not None and any(rt.scenario.heater_relay(r) for r in rt.scenario.rooms):
        baseline = rt.baseline_run()
        for room_id in rt.scenario.rooms:
            if rt.scenario.heater_relay(room_id) is not None:
                reports.append(rt.energy_report(room_id, epoch_ms, end_ms, baseline))
    text = "".join(render_report_text(rp, intervals_by_room[rp.room_id]) for rp in reports)
    (outdir / "report.txt").write_text(text or "no heated rooms\n", encoding="utf-8")
    (outdir / "report.csv").write_text(render_report_csv(reports), encoding="utf-8")
    (outdir / "absence.csv").write_text(render_absence_csv(intervals_by_room), encoding="utf-8")

    (outdir / "scenario.scn").write_bytes(scenario_bytes)
    manifest = {
        "scenario": scenario_name,
        "scenario_sha256": hashlib.sha256(scenario_bytes).hexdigest(),
        "seed": rt.config.seed,
        "duration_ticks": rt.clock.now,
        "tick_ms": rt.config.tick_ms,
        "epoch_ms": rt.config.epoch_ms,
        "setback_enabled": rt.config.setback_enabled,
    }
    (outdir / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return manifest


def run_scenario(scenario_path, seed: int, duration_ticks: int, outdir,
                 config: Optional[RunConfig] = None) -> dict:
    """Build, run and export one scenario; deterministic per (bytes, seed, duration)."""
    scenario_path = Path(scenario_path)
    scenario_bytes = scenario_path.read_bytes()
    scenario = load_scenario(scenario_path)
    cfg = replace(config or RunConfig(), seed=seed)
    rt = simulate(scenario, cfg, duration_ticks)
    return write_outputs(rt, Path(outdir), scenario_bytes, scenario_path.name)
