"""Simulated protocol-flavored links driven by a shared logical clock.

Two single-hop link flavors live here: a BLE-like connect/subscribe link
with periodic notifications, and a Z-Wave-like link carrying unsolicited
device events to the hub. The multi-hop mesh flavor is in sbsim.mesh.

Loss is an independent Bernoulli draw per (frame, hop) taken from a
per-link stream in send order, which makes seeded replay an exact oracle.
Delivered frames come out of advance() in (tick, src, seq) order.
"""

import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .errors import AlreadyConnected, Disconnected, InvalidKind, NodeUnknown
from .rng import substream

HUB = "hub"
BROADCAST = "*"

BLE_KINDS = ("temperature", "humidity", "luminance")
DEFAULT_BLE_PERIOD_TICKS = 10  # 1 s at 100 ms/tick, a typical sensor-tag cadence


class LinkFlavor(Enum):
    BLE = "ble"
    ZWAVE = "zwave"
    ZIGBEE_MESH = "zigbee-mesh"


@dataclass(frozen=True)
class LinkSpec:
    link_id: str
    flavor: LinkFlavor
    loss_prob: float = 0.0
    latency_ticks: int = 0

    def __post_init__(self):
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(f"loss_prob must be in [0,1], got {self.loss_prob}")
        if self.latency_ticks < 0:
            raise ValueError("latency_ticks must be >= 0")


@dataclass(frozen=True)
class Frame:
    src: str
    dst: str
    seq: int
    ttl: int
    payload: object
    sent_at: int


@dataclass(frozen=True)
class Delivery:
    delivered: bool
    path: tuple[str, ...]
    hops: int
    delivered_at: Optional[int]


@dataclass
class BleConnection:
    link_id: str
    node: str
    alive: bool = True


@dataclass
class Subscription:
    sub_id: int
    conn: BleConnection
    kind: str
    period_ticks: int
    source: Optional[Callable[[int], object]]
    active: bool = True


class _LinkState:
    __slots__ = ("spec", "rng", "seq", "connected", "registered")

    def __init__(self, spec: LinkSpec, seed: int):
        self.spec = spec
        self.rng = substream(seed, "loss", spec.link_id)
        self.seq: dict[str, int] = {}
        self.connected: set[str] = set()   # BLE
        self.registered: set[str] = set()  # Z-Wave

    def next_seq(self, src: str) -> int:
        n = self.seq.get(src, 0)
        self.seq[src] = n + 1
        return n


class TransportNet:
    """Single-owner world of links and nodes with one delivery queue."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.now = 0
        self._nodes: set[str] = set()
        self._links: dict[str, _LinkState] = {}
        self._deliveries: list = []   # (deliver_at, src, seq, order, frame)
        self._due_subs: list = []     # (due, node, order, Subscription)
        self._order = itertools.count()
        self._sub_ids = itertools.count(1)
        self.metrics = {"sent": 0, "lost": 0, "delivered": 0}

    # -- registry ------------------------------------------------------------

    def add_node(self, node_id: str) -> None:
        self._nodes.add(node_id)

    def add_link(self, spec: LinkSpec) -> LinkSpec:
        if spec.flavor is LinkFlavor.ZIGBEE_MESH:
            raise ValueError("mesh links are driven by sbsim.mesh.Mesh")
        if spec.link_id in self._links:
            raise ValueError(f"duplicate link id {spec.link_id!r}")
        self._links[spec.link_id] = _LinkState(spec, self.seed)
        return spec

    def _link(self, link_id: str) -> _LinkState:
        try:
            return self._links[link_id]
        except KeyError:
            raise NodeUnknown(f"unknown link {link_id!r}") from None

    # -- BLE -----------------------------------------------------------------

    def connect_ble(self, link_id: str, node: str) -> BleConnection:
        link = self._link(link_id)
        if link.spec.flavor is not LinkFlavor.BLE:
            raise ValueError(f"link {link_id!r} is not BLE-flavored")
        if node not in self._nodes:
            raise NodeUnknown(node)
        if node in link.connected:
            raise AlreadyConnected(f"{node} already connected on {link_id}")
        link.connected.add(node)
        return BleConnection(link_id, node)

    def subscribe_ble(self, conn: BleConnection, kind: str,
                      period_ticks: int = DEFAULT_BLE_PERIOD_TICKS,
                      source: Optional[Callable[[int], object]] = None) -> Subscription:
        """Queue one notification frame every period_ticks until unsubscribed.

        source(tick) supplies the payload (a reading, typically); returning
        None skips that notification. Without a source a marker payload is
        sent, which is enough for link-level tests.
        """
        if not conn.alive or conn.node not in self._link(conn.link_id).connected:
            raise Disconnected(conn.node)
        if kind not in BLE_KINDS:
            raise InvalidKind(kind)
        if period_ticks < 1:
            raise ValueError("period_ticks must be >= 1")
        sub = Subscription(next(self._sub_ids), conn, kind, period_ticks, source)
        heapq.heappush(self._due_subs,
                       (self.now + period_ticks, conn.node, next(self._order), sub))
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        sub.active = False

    def disconnect(self, conn: BleConnection) -> None:
        link = self._link(conn.link_id)
        conn.alive = False
        link.connected.discard(conn.node)

    # -- Z-Wave --------------------------------------------------------------

    def register_zwave(self, link_id: str, node: str) -> None:
        link = self._link(link_id)
        if link.spec.flavor is not LinkFlavor.ZWAVE:
            raise ValueError(f"link {link_id!r} is not Z-Wave-flavored")
        if node not in self._nodes:
            raise NodeUnknown(node)
        link.registered.add(node)

    def emit_zwave_event(self, link_id: str, node: str, payload: object,
                         at: Optional[int] = None) -> None:
        """Queue an unsolicited frame addressed to the hub (loss/latency apply)."""
        link = self._link(link_id)
        if link.spec.flavor is not LinkFlavor.ZWAVE:
            raise ValueError(f"link {link_id!r} is not Z-Wave-flavored")
        if node not in link.registered:
            raise NodeUnknown(node)
        sent_at = self.now if at is None else at
        frame = Frame(src=node, dst=HUB, seq=link.next_seq(node), ttl=1,
                      payload=payload, sent_at=sent_at)
        self._send(link, frame)

    # -- shared machinery ------------------------------------------------------

    def _send(self, link: _LinkState, frame: Frame) -> None:
        self.metrics["sent"] += 1
        draw = link.rng.random()  # one draw per (frame, hop), always consumed
        if draw < link.spec.loss_prob:
            self.metrics["lost"] += 1
            return
        deliver_at = frame.sent_at + link.spec.latency_ticks
        heapq.heappush(self._deliveries,
                       (deliver_at, frame.src, frame.seq, next(self._order), frame))

    def next_activity(self) -> Optional[int]:
        """Earliest tick at which this net will produce or deliver anything."""
        candidates = []
        while self._due_subs and not self._due_subs[0][3].active:
            heapq.heappop(self._due_subs)
        if self._due_subs:
            candidates.append(self._due_subs[0][0])
        if self._deliveries:
            candidates.append(self._deliveries[0][0])
        return min(candidates) if candidates else None

    def advance(self, n_ticks: int) -> list[Frame]:
        """Move the net n_ticks forward; return frames delivered in the window.

        Output order is (delivery tick, src, seq) — deterministic for a
        fixed seed and scenario. n_ticks=0 drains anything already due.
        """
        if n_ticks < 0:
            raise ValueError("n_ticks must be >= 0")
        end = self.now + n_ticks
        # Produce all notifications due in the window first; they can only
        # schedule deliveries at or after their own due tick.
        while self._due_subs and self._due_subs[0][0] <= end:
            due, node, _, sub = heapq.heappop(self._due_subs)
            if not sub.active or not sub.conn.alive:
                continue
            link = self._link(sub.conn.link_id)
            payload = sub.source(due) if sub.source is not None else {"kind": sub.kind}
            if payload is not None:
                frame = Frame(src=node, dst=HUB, seq=link.next_seq(node), ttl=1,
                              payload=payload, sent_at=due)
                self._send(link, frame)
            heapq.heappush(self._due_subs,
                           (due + sub.period_ticks, node, next(self._order), sub))
        out = []
        while self._deliveries and self._deliveries[0][0] <= end:
            _, _, _, _, frame = heapq.heappop(self._deliveries)
            out.append(frame)
            self.metrics["delivered"] += 1
        self.now = end
        return out
