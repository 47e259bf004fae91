"""In-process service bus: named services, request-response, pub-sub.

Every building block registers as a named service exposing operations;
callers use one-way notify (at-most-once), request-response (exactly one
Response or Fault per request, correlated by id), and topic publish with
snapshot fan-out. Timeouts run on the simulated clock so tests are
deterministic.

Handlers are invoked synchronously in arrival order. A handler may return
NO_REPLY to model a stalled service; the pending request then faults with
Timeout exactly at its deadline tick when the driver advances the bus.
"""

import heapq
import itertools
import threading
from dataclasses import dataclass
from typing import Callable, Optional

from .clock import LogicalClock
from .errors import DuplicateName

SERVICE_NOT_FOUND = "ServiceNotFound"
OPERATION_NOT_FOUND = "OperationNotFound"
TIMEOUT = "Timeout"
HANDLER_FAULT = "HandlerFault"

ONE_WAY = "OneWay"
REQUEST = "Request"
RESPONSE = "Response"
FAULT = "Fault"
PUBLISH = "Publish"

NO_REPLY = object()  # sentinel: handler accepted the request but will never answer


@dataclass(frozen=True)
class FaultInfo:
    code: str
    detail: str = ""


@dataclass(frozen=True)
class Envelope:
    msg_id: int
    correlation_id: Optional[int]
    kind: str
    operation: str
    topic: Optional[str]
    payload: object
    at: int


@dataclass(frozen=True)
class ServiceDescriptor:
    name: str
    operations: frozenset[str]
    registered_at: int


class Pending:
    """Outcome of a request: exactly one of value/fault, never both."""

    __slots__ = ("request_env", "done", "value", "fault", "at", "reply_env")

    def __init__(self, request_env: Envelope):
        self.request_env = request_env
        self.done = False
        self.value = None
        self.fault: Optional[FaultInfo] = None
        self.at: Optional[int] = None
        self.reply_env: Optional[Envelope] = None

    @property
    def request_id(self) -> int:
        return self.request_env.msg_id

    @property
    def ok(self) -> bool:
        return self.done and self.fault is None

    def _resolve(self, value, at: int, msg_id: int) -> None:
        assert not self.done, "request resolved twice"
        self.done, self.value, self.at = True, value, at
        self.reply_env = Envelope(msg_id, self.request_env.msg_id, RESPONSE,
                                  self.request_env.operation, None, value, at)

    def _fail(self, fault: FaultInfo, at: int, msg_id: int) -> None:
        assert not self.done, "request resolved twice"
        self.done, self.fault, self.at = True, fault, at
        self.reply_env = Envelope(msg_id, self.request_env.msg_id, FAULT,
                                  self.request_env.operation, None, fault, at)


class Registration:
    def __init__(self, bus: "Bus", name: str):
        self._bus = bus
        self.name = name
        self.alive = True

    def close(self) -> None:
        if self.alive:
            self.alive = False
            self._bus._unregister(self.name)


class TopicSubscription:
    def __init__(self, bus: "Bus", pattern: str, handler: Callable[[str, object], None]):
        self._bus = bus
        self.pattern = pattern
        self.handler = handler
        self.alive = True

    def close(self) -> None:
        self.alive = False


def _payload_ok(value, depth: int = 0) -> bool:
    """Structured trees only: scalars, sequences, string-keyed maps."""
    if depth > 32:
        return False
    if value is None or isinstance(value, (bool, int, float, str, bytes)):
        return True
    if isinstance(value, (list, tuple)):
        return all(_payload_ok(v, depth + 1) for v in value)
    if isinstance(value, dict):
        return all(isinstance(k, str) and _payload_ok(v, depth + 1) for k, v in value.items())
    return False


class _Service:
    __slots__ = ("descriptor", "handler")

    def __init__(self, descriptor: ServiceDescriptor, handler):
        self.descriptor = descriptor
        self.handler = handler


class Bus:
    def __init__(self, clock: LogicalClock, strict_payloads: bool = False):
        self.clock = clock
        self.strict_payloads = strict_payloads
        self._lock = threading.RLock()
        self._services: dict[str, _Service] = {}
        self._subs: list[TopicSubscription] = []
        self._msg_ids = itertools.count(1)
        self._timeouts: list = []  # (deadline, request_id, Pending)
        self.metrics = {"dropped_notifies": 0, "requests": 0, "published": 0,
                        "faults": 0, "subscriber_errors": 0, "handler_errors": 0}

    # -- registry -----------------------------------------------------------------

    def register(self, name: str, operations, handler) -> Registration:
        """handler(operation, payload) -> reply payload | NO_REPLY; raising faults the request."""
        ops = frozenset(operations)
        if not ops:
            raise ValueError("operations must be non-empty")
        with self._lock:
            if name in self._services:
                raise DuplicateName(name)
            desc = ServiceDescriptor(name, ops, self.clock.now)
            self._services[name] = _Service(desc, handler)
        return Registration(self, name)

    def _unregister(self, name: str) -> None:
        with self._lock:
            self._services.pop(name, None)

    def services(self) -> list[ServiceDescriptor]:
        with self._lock:
            return [s.descriptor for s in self._services.values()]

    # -- request/response -----------------------------------------------------------

    def request(self, service: str, operation: str, payload,
                timeout_ticks: int) -> Pending:
        if timeout_ticks <= 0:
            raise ValueError("timeout_ticks must be positive")
        if self.strict_payloads and not _payload_ok(payload):
            raise ValueError("payload is not a structured tree")
        with self._lock:
            now = self.clock.now
            env = Envelope(next(self._msg_ids), None, REQUEST, operation, None, payload, now)
            pending = Pending(env)
            self.metrics["requests"] += 1
            svc = self._services.get(service)
            if svc is None:
                self._fault(pending, SERVICE_NOT_FOUND, f"no service {service!r}", now)
                return pending
            if operation not in svc.descriptor.operations:
                self._fault(pending, OPERATION_NOT_FOUND,
                            f"{service!r} has no operation {operation!r}", now)
                return pending
            try:
                result = svc.handler(operation, payload)
            except Exception as exc:  # isolate the handler; service stays registered
                self._fault(pending, HANDLER_FAULT, f"{type(exc).__name__}: {exc}", now)
                return pending
            if result is NO_REPLY:
                heapq.heappush(self._timeouts, (now + timeout_ticks, env.msg_id, pending))
                return pending
            pending._resolve(result, now, next(self._msg_ids))
            return pending

    def _fault(self, pending: Pending, code: str, detail: str, at: int) -> None:
        self.metrics["faults"] += 1
        pending._fail(FaultInfo(code, detail), at, next(self._msg_ids))

    def next_deadline(self) -> Optional[int]:
        with self._lock:
            while self._timeouts and self._timeouts[0][2].done:
                heapq.heappop(self._timeouts)
            return self._timeouts[0][0] if self._timeouts else None

    def process_due(self, now: Optional[int] = None) -> int:
        """Fault every stalled request whose deadline has passed; returns count."""
        t = self.clock.now if now is None else now
        fired = 0
        with self._lock:
            while self._timeouts and self._timeouts[0][0] <= t:
                deadline, _, pending = heapq.heappop(self._timeouts)
                if pending.done:
                    continue
                self._fault(pending, TIMEOUT, f"no reply by tick {deadline}", deadline)
                fired += 1
        return fired

    # -- one-way ----------------------------------------------------------------------

    def notify(self, service: str, operation: str, payload) -> None:
        """At-most-once; unknown destination drops the message and bumps a counter."""
        if self.strict_payloads and not _payload_ok(payload):
            raise ValueError("payload is not a structured tree")
        with self._lock:
            svc = self._services.get(service)
            if svc is None or operation not in svc.descriptor.operations:
                self.metrics["dropped_notifies"] += 1
                return
            try:
                svc.handler(operation, payload)
            except Exception:
                self.metrics["handler_errors"] += 1

    # -- pub-sub ----------------------------------------------------------------------

    def subscribe(self, pattern: str, handler: Callable[[str, object], None]) -> TopicSubscription:
        """Exact topic or trailing-wildcard pattern such as 'readings.*'."""
        sub = TopicSubscription(self, pattern, handler)
        with self._lock:
            self._subs.append(sub)
        return sub

    def publish(self, topic: str, payload) -> int:
        """Deliver to the subscribers present at publish time; returns their count."""
        if self.strict_payloads and not _payload_ok(payload):
            raise ValueError("payload is not a structured tree")
        with self._lock:
            self._subs = [s for s in self._subs if s.alive]
            targets = [s for s in self._subs if _topic_matches(s.pattern, topic)]
            self.metrics["published"] += 1
        for sub in targets:
            try:
                sub.handler(topic, payload)
            except Exception:
                self.metrics["subscriber_errors"] += 1
        return len(targets)


def _topic_matches(pattern: str, topic: str) -> bool:
    if pattern == topic or pattern == "*":
        return True
    if pattern.endswith(".*"):
        return topic.startswith(pattern[:-1])  # keep the dot: 'readings.*' ~ 'readings.x.y'
    return False
