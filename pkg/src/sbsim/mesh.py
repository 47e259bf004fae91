"""ZigBee-like mesh: controlled flooding with TTL and duplicate suppression.

Forwarding is breadth-first in deterministic order (neighbors sorted by
node id), each node forwards a given (src, seq) at most once, and every
edge traversal consumes one Bernoulli loss draw from the mesh's stream.
Per-hop latency accumulates along the winning path.
"""

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .errors import SrcUnknown, ValidationError
from .rng import substream
from .transport import Delivery, Frame, LinkFlavor, LinkSpec


@dataclass(frozen=True)
class MeshTopology:
    nodes: frozenset[str]
    edges: frozenset[frozenset[str]]
    ttl_default: int = 8

    def __post_init__(self):
        if self.ttl_default < 1:
            raise ValidationError("ttl_default must be positive")
        for edge in self.edges:
            if len(edge) != 2:
                raise ValidationError(f"self-loop or malformed edge: {set(edge)}")
            for n in edge:
                if n not in self.nodes:
                    raise ValidationError(f"edge references undeclared node {n!r}")

    def neighbors(self, node: str) -> tuple[str, ...]:
        out = [next(iter(e - {node})) for e in self.edges if node in e]
        return tuple(sorted(out))


def parse_topology(text: str, ttl_default: int = 8) -> MeshTopology:
    """Plain-text topology: 'node <id>' and 'edge <id> <id>' lines, # comments."""
    nodes: set[str] = set()
    edges: set[frozenset[str]] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "node" and len(parts) == 2:
            nodes.add(parts[1])
        elif parts[0] == "edge" and len(parts) == 3:
            if parts[1] == parts[2]:
                raise ValidationError(f"line {line_no}: self-loop on {parts[1]!r}")
            edges.add(frozenset((parts[1], parts[2])))
        else:
            raise ValidationError(f"line {line_no}: expected 'node <id>' or 'edge <id> <id>'")
    return MeshTopology(frozenset(nodes), frozenset(edges), ttl_default)


def load_topology(path, ttl_default: int = 8) -> MeshTopology:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_topology(fh.read(), ttl_default)


class Mesh:
    """Stateful mesh transport over a fixed topology.

    Keeps the per-node forwarded-set across sends so replayed (src, seq)
    pairs stay suppressed, and a delivered-to-application log for the
    duplicate-suppression checks.
    """

    def __init__(self, topo: MeshTopology, link: Optional[LinkSpec] = None, seed: int = 0):
        if link is None:
            link = LinkSpec("mesh0", LinkFlavor.ZIGBEE_MESH)
        if link.flavor is not LinkFlavor.ZIGBEE_MESH:
            raise ValueError("mesh requires a ZigbeeMesh-flavored link")
        self.topo = topo
        self.link = link
        self._rng = substream(seed, "loss", link.link_id)
        self._seq: dict[str, int] = {}
        self._forwarded: dict[str, set] = {n: set() for n in topo.nodes}
        self._delivered: set = set()
        self.delivered_log: list[tuple[str, tuple[str, int]]] = []

    def next_seq(self, src: str) -> int:
        n = self._seq.get(src, 0)
        self._seq[src] = n + 1
        return n

    def make_frame(self, src: str, dst: str, payload: object = b"",
                   ttl: Optional[int] = None, sent_at: int = 0) -> Frame:
        return Frame(src=src, dst=dst, seq=self.next_seq(src),
                     ttl=self.topo.ttl_default if ttl is None else ttl,
                     payload=payload, sent_at=sent_at)

    def send(self, frame: Frame) -> Delivery:
        """Flood the frame toward frame.dst; return the first delivery.

        A frame never traverses more than frame.ttl hops. TTL exhaustion
        or disconnection comes back as delivered=False, not an exception.
        """
        if frame.src not in self.topo.nodes:
            raise SrcUnknown(frame.src)
        key = (frame.src, frame.seq)
        if frame.ttl <= 0:
            return Delivery(False, (), 0, None)
        self._forwarded[frame.src].add(key)
        result_path: Optional[tuple[str, ...]] = None
        queue = deque([(frame.src, frame.ttl, (frame.src,))])
        while queue:
            node, ttl_left, path = queue.popleft()
            if ttl_left <= 0:
                continue
            for nb in self.topo.neighbors(node):
                if self._rng.random() < self.link.loss_prob:
                    continue  # draw per (frame, hop) in flood order
                if nb == frame.dst and (nb, key) not in self._delivered:
                    self._delivered.add((nb, key))
                    self.delivered_log.append((nb, key))
                    if result_path is None:
                        result_path = path + (nb,)
                if key in self._forwarded[nb]:
                    continue
                self._forwarded[nb].add(key)
                queue.append((nb, ttl_left - 1, path + (nb,)))
        if result_path is None:
            return Delivery(False, (), 0, None)
        hops = len(result_path) - 1
        return Delivery(True, result_path, hops,
                        frame.sent_at + hops * self.link.latency_ticks)
