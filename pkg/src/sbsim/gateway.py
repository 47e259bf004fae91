"""Wire gateway: newline-delimited JSON frames over a stream socket.

Request:  {"id": "<client string>", "op": "<name>", "params": {...}}
Reply:    {"id": ..., "ok": true, "data": {...}}
          {"id": ..., "ok": false, "error": {"code": ..., "detail": ...}}
Stream:   {"id": <subscribe id>, "stream": true, "data": {...}}

Every request id is answered exactly once; malformed frames get a
BadFrame error and never crash the gateway. Downstream bus faults pass
through in the error field.
"""

import json
import socketserver
import threading
import time
from typing import Callable, Optional

from .building import MANUAL
from .clock import iso_utc, parse_ts
from .errors import SimError
from .runtime import Runtime
from .store import RangeQuery, Series, downsample

OPS = ("series.query", "series.stream", "occupancy.get", "relay.set",
       "security.arm", "security.disarm", "feedback.submit", "report.energy",
       "alerts.stream")


class Gateway:
    """Dispatches wire frames onto the runtime's bus; transport-agnostic."""

    def __init__(self, runtime: Runtime):
        self.rt = runtime
        self._baseline_cache: Optional[tuple[int, Runtime]] = None

    def handle_line(self, line: str,
                    stream_sink: Optional[Callable[[dict], None]] = None,
                    stream_registry: Optional[list] = None) -> dict:
        try:
            frame = json.loads(line)
        except (ValueError, TypeError):
            return {"id": None, "ok": False,
                    "error": {"code": "BadFrame", "detail": "not valid JSON"}}
        if not isinstance(frame, dict):
            return {"id": None, "ok": False,
                    "error": {"code": "BadFrame", "detail": "frame must be an object"}}
        return self.handle_frame(frame, stream_sink, stream_registry)

    def handle_frame(self, frame: dict,
                     stream_sink: Optional[Callable[[dict], None]] = None,
                     stream_registry: Optional[list] = None) -> dict:
        frame_id = frame.get("id")
        op = frame.get("op")
        params = frame.get("params") or {}
        if not isinstance(frame_id, str) or not isinstance(op, str) \
                or not isinstance(params, dict):
            return {"id": frame_id if isinstance(frame_id, str) else None, "ok": False,
                    "error": {"code": "BadFrame", "detail": "need string id and op"}}
        if op not in OPS:
            return self._err(frame_id, "UnknownOp", f"unknown op {op!r}")
        try:
            with self.rt.lock:
                data = self._dispatch(op, params, frame_id, stream_sink, stream_registry)
        except SimError as exc:
            return self._err(frame_id, type(exc).__name__, str(exc))
        except (KeyError, ValueError, TypeError) as exc:
            return self._err(frame_id, "BadFrame", f"{type(exc).__name__}: {exc}")
        return {"id": frame_id, "ok": True, "data": data}

    def _err(self, frame_id, code, detail) -> dict:
        return {"id": frame_id, "ok": False, "error": {"code": code, "detail": detail}}

    def _request(self, service, op, payload):
        pending = self.rt.bus.request(service, op, payload,
                                      self.rt.config.request_timeout_ticks)
        if pending.fault is not None:
            raise SimError(f"{pending.fault.code}: {pending.fault.detail}")
        if not pending.done:
            raise SimError("Timeout: service did not answer synchronously")
        return pending.value

    # -- ops ---------------------------------------------------------------------

    def _dispatch(self, op, params, frame_id, stream_sink, stream_registry):
        rt = self.rt
        if op == "series.query":
            return self._series_query(params)
        if op == "series.stream":
            return self._open_stream(frame_id, "readings.*", stream_sink,
                                     stream_registry, self._series_filter(params))
        if op == "alerts.stream":
            return self._open_stream(frame_id, "alerts", stream_sink,
                                     stream_registry, None)
        if op == "occupancy.get":
            return self._request("occupancy", "estimate",
                                 {"room": params["room"], "at": rt.clock.ts_ms()})
        if op == "relay.set":
            return self._request("actuation", "set",
                                 {"node": params["node"], "on": bool(params["on"]),
                                  "source": MANUAL})
        if op == "security.arm":
            return self._request("security", "arm", {"room": params.get("room")})
        if op == "security.disarm":
            return self._request("security", "disarm", {"room": params.get("room")})
        if op == "feedback.submit":
            payload = {"user": params["user"], "room": params["room"],
                       "ts": rt.clock.ts_ms(),
                       "thermal_vote": params["thermal_vote"],
                       "humidity_vote": params["humidity_vote"]}
            if "temp_c" in params:
                payload["temp_c"] = params["temp_c"]
            return self._request("comfort", "submit", payload)
        if op == "report.energy":
            return self._report_energy(params)
        raise ValueError(f"unhandled op {op}")

    def _series_query(self, params) -> dict:
        rt = self.rt
        from_ms = parse_ts(params["from"]) if "from" in params else rt.config.epoch_ms
        to_ms = parse_ts(params["to"]) if "to" in params else rt.clock.ts_ms() + 1
        node = params.get("node")
        kind = params.get("kind")
        q = RangeQuery(from_ms, to_ms,
                       frozenset([node]) if node else None,
                       frozenset([kind]) if kind else None)
        readings = rt.store.query_range(q)
        if "window_ms" in params:
            window = int(params["window_ms"])
            agg = params.get("agg", "mean")
            rows = []
            for key in sorted({(r.node_id, r.kind) for r in readings}):
                pts = [(r.ts_ms, r.value) for r in readings if (r.node_id, r.kind) == key]
                ds = downsample(Series(key, pts), window, agg)
                rows += [{"ts": ts, "node": key[0], "kind": key[1], "value": v}
                         for ts, v in ds.points]
            rows.sort(key=lambda r: (r["ts"], r["node"], r["kind"]))
            return {"rows": rows, "window_ms": window, "agg": agg}
        return {"rows": [{"ts": r.ts_ms, "node": r.node_id, "kind": r.kind,
                          "value": r.value, "unit": r.unit} for r in readings]}

    def _series_filter(self, params):
        node = params.get("node")
        kind = params.get("kind")

        def accept(payload) -> bool:
            if node and payload.get("node") != node:
                return False
            if kind and payload.get("kind") != kind:
                return False
            return True
        return accept

    def _open_stream(self, frame_id, pattern, stream_sink, stream_registry, accept):
        if stream_sink is None:
            raise ValueError("this transport cannot carry streams")

        def forward(topic, payload):
            if accept is None or accept(payload):
                stream_sink({"id": frame_id, "stream": True, "data": payload})

        sub = self.rt.bus.subscribe(pattern, forward)
        if stream_registry is not None:
            stream_registry.append(sub)
        return {"subscribed": pattern, "stream_id": frame_id}

    def _report_energy(self, params) -> dict:
        rt = self.rt
        room = params["room"]
        from_ms = parse_ts(params["from"]) if "from" in params else None
        to_ms = parse_ts(params["to"]) if "to" in params else None
        baseline = self._baseline()
        report = rt.energy_report(room, from_ms, to_ms, baseline)
        intervals = rt.tracker.absence_intervals(
            room, report.from_ms, report.to_ms, rt.config.min_gap_ms)
        return {
            "room": report.room_id,
            "from": iso_utc(report.from_ms), "to": iso_utc(report.to_ms),
            "baseline_kwh": report.baseline_kwh, "actual_kwh": report.actual_kwh,
            "saved_kwh": report.saved_kwh, "setback_hours": report.setback_hours,
            "absence": [{"start": iv.start_ms, "end": iv.end_ms} for iv in intervals],
        }

    def _baseline(self) -> Runtime:
        # the counterfactual rerun is expensive; reuse it while the clock stands still
        now = self.rt.clock.now
        if self._baseline_cache is None or self._baseline_cache[0] != now:
            self._baseline_cache = (now, self.rt.baseline_run())
        return self._baseline_cache[1]


class GatewayServer:
    """TCP server speaking NDJSON, with an optional live simulation driver."""

    def __init__(self, runtime: Runtime, host: str = "127.0.0.1", port: int = 7700,
                 rate_ticks_per_s: float = 10.0):
        self.gateway = Gateway(runtime)
        self.runtime = runtime
        self.rate = rate_ticks_per_s
        self._stop = threading.Event()
        gw = self.gateway

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                write_lock = threading.Lock()

                def sink(obj: dict) -> None:
                    line = (json.dumps(obj, separators=(",", ":")) + "\n").encode()
                    with write_lock:
                        try:
                            self.wfile.write(line)
                            self.wfile.flush()
                        except OSError:
                            pass

                streams: list = []
                try:
                    for raw in self.rfile:
                        line = raw.decode("utf-8", "replace").rstrip("\r\n")
                        if not line:
                            continue
                        sink(gw.handle_line(line, stream_sink=sink,
                                            stream_registry=streams))
                finally:
                    for sub in streams:
                        sub.close()

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server((host, port), Handler)
        self.host, self.port = self._server.server_address

    def _drive(self):
        step = 0.05
        while not self._stop.is_set():
            time.sleep(step)
            self.runtime.advance(max(1, round(self.rate * step)))

    def serve_forever(self, drive: bool = True):
        if drive and self.rate > 0:
            threading.Thread(target=self._drive, daemon=True).start()
        try:
            self._server.serve_forever(poll_interval=0.1)
        finally:
            self._stop.set()

    def shutdown(self):
        self._stop.set()
        self._server.shutdown()
        self._server.server_close()
