"""Deterministic discrete-event message network.

Links are single-hop and undirected. Every pair of nodes is linked by default:
Earth station <-> Moon node at ``EARTH_LATENCY_MS`` (one way), Moon <-> Moon
at ``MESH_LATENCY_MS``. Explicit link entries override individual pairs.

Randomness (jitter, drops) comes from ``random.Random(seed)`` (MT19937),
which replays identically on every platform. For each unicast delivery the
generator is drawn exactly twice, ``random()`` for the drop decision and
``randint(0, jitter_ms)`` for jitter, whether or not drops/jitter are active,
so changing one link's settings does not reshuffle the rest of the run.
"""

from __future__ import annotations

import enum
import heapq
import math
import random
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

from lunamarket.errors import DanglingLink, DuplicateNode, NetworkError, UnknownNode, UnknownTarget

MESH_LATENCY_MS = 50
EARTH_LATENCY_MS = 5000

BROADCAST = "*"

# payload-dependent default message sizes in bytes
MESSAGE_SIZES = {
    "JobRequestMsg": 2048,
    "BidMsg": 256,
    "ContractMsg": 512,
    "LedgerTxMsg": 512,
}


class Role(enum.Enum):
    EARTH_STATION = "EarthStation"
    ROBOT = "Robot"
    SEQUENCER = "Sequencer"

    @property
    def on_earth(self) -> bool:
        return self is Role.EARTH_STATION


@dataclass(frozen=True)
class Node:
    id: str
    role: Role


@dataclass
class LinkSpec:
    latency_ms: int
    jitter_ms: int = 0
    bandwidth_bytes_per_sec: int | None = None
    drop_prob: float = 0.0
    partitioned: bool = False

    def __post_init__(self) -> None:
        if self.latency_ms < 0 or self.jitter_ms < 0:
            raise NetworkError("latency and jitter must be non-negative")
        if not 0.0 <= self.drop_prob <= 1.0:
            raise NetworkError("drop probability must lie in [0, 1]")
        if self.bandwidth_bytes_per_sec is not None and self.bandwidth_bytes_per_sec <= 0:
            raise NetworkError("bandwidth must be positive")


@dataclass
class LinkCounters:
    delivered_bytes: int = 0
    delivered_count: int = 0
    dropped_bytes: int = 0
    dropped_count: int = 0


@dataclass(frozen=True)
class Message:
    """Typed payload. ``kind`` is one of JobRequestMsg, BidMsg, ContractMsg,
    DeliverableMsg, LedgerTxMsg; ``body`` holds flat JSON-able fields."""

    kind: str
    body: dict = field(default_factory=dict)

    @property
    def job_id(self) -> str | None:
        return self.body.get("jobId")


@dataclass(frozen=True)
class Envelope:
    src: str
    dst: str
    payload: Message
    size_bytes: int
    send_time_ms: int

    def __post_init__(self) -> None:
        if self.size_bytes <= 0:
            raise NetworkError("envelope size must be positive")


def envelope(src: str, dst: str, payload: Message, send_time_ms: int, size_bytes: int | None = None) -> Envelope:
    if size_bytes is None:
        size_bytes = MESSAGE_SIZES.get(payload.kind, 512)
    return Envelope(src, dst, payload, size_bytes, send_time_ms)


@dataclass(frozen=True, order=True)
class DeliveryEvent:
    time_ms: int
    seq: int
    envelope: Envelope = field(compare=False)
    link: tuple[str, str] = field(compare=False)


@dataclass
class TopologySpec:
    nodes: list[Node]
    links: list[tuple[str, str, LinkSpec]] = field(default_factory=list)
    mesh_latency_ms: int = MESH_LATENCY_MS
    earth_latency_ms: int = EARTH_LATENCY_MS
    jitter_ms: int = 0
    drop_prob: float = 0.0
    bandwidth_bytes_per_sec: int | None = None


def link_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


class Network:
    def __init__(self, nodes: dict[str, Node], links: dict[tuple[str, str], LinkSpec], seed: int) -> None:
        self.nodes = nodes
        self.links = links
        self.counters = {k: LinkCounters() for k in links}
        self.crashed: set[str] = set()
        self.now = 0
        self._rng = random.Random(seed)
        self._queue: list[DeliveryEvent] = []
        self._seq = 0
        self.dropped: list[tuple[Envelope, str]] = []

    def link(self, a: str, b: str) -> LinkSpec:
        try:
            return self.links[link_key(a, b)]
        except KeyError:
            raise UnknownTarget(f"no link {a}<->{b}") from None

    def robots(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.role is Role.ROBOT)

    def _drop(self, env: Envelope, key: tuple[str, str], reason: str) -> None:
        c = self.counters[key]
        c.dropped_bytes += env.size_bytes
        c.dropped_count += 1
        self.dropped.append((env, reason))

    def send(self, env: Envelope) -> list[DeliveryEvent]:
        if env.src not in self.nodes:
            raise UnknownNode(env.src)
        if env.dst == BROADCAST:
            targets = [r for r in self.robots() if r != env.src]
        else:
            if env.dst not in self.nodes:
                raise UnknownNode(env.dst)
            targets = [env.dst]
        if env.src in self.crashed:
            return []
        scheduled = []
        for dst in targets:
            key = link_key(env.src, dst)
            spec = self.links[key]
            u = self._rng.random()
            jitter = self._rng.randint(0, spec.jitter_ms)
            if spec.partitioned:
                self._drop(env, key, "partitioned")
                continue
            if u < spec.drop_prob:
                self._drop(env, key, "lost")
                continue
            t = env.send_time_ms + spec.latency_ms + jitter
            if spec.bandwidth_bytes_per_sec:
                t += math.ceil(env.size_bytes * 1000 / spec.bandwidth_bytes_per_sec)
            unicast = env if env.dst == dst else replace(env, dst=dst)
            ev = DeliveryEvent(t, self._seq, unicast, key)
            self._seq += 1
            heapq.heappush(self._queue, ev)
            scheduled.append(ev)
        return scheduled

    def peek_time(self) -> int | None:
        return self._queue[0].time_ms if self._queue else None

    def step(self, until_ms: int) -> list[DeliveryEvent]:
        """Pop every delivery due at or before ``until_ms`` in (time, seq) order."""
        if until_ms < self.now:
            raise NetworkError(f"cannot step backwards to {until_ms} from {self.now}")
        out = []
        while self._queue and self._queue[0].time_ms <= until_ms:
            ev = heapq.heappop(self._queue)
            env = ev.envelope
            # faults that happened while in flight still apply
            if self.links[ev.link].partitioned:
                self._drop(env, ev.link, "partitioned")
                continue
            if env.dst in self.crashed:
                self._drop(env, ev.link, "crashed")
                continue
            c = self.counters[ev.link]
            c.delivered_bytes += env.size_bytes
            c.delivered_count += 1
            out.append(ev)
        self.now = until_ms
        return out

    def inject_fault(self, kind: str, target: str | tuple[str, str], value: Any = None) -> None:
        """Apply one fault.

        kinds: ``partition`` / ``unpartition`` (target = node pair),
        ``drop`` (target = node pair, value = probability),
        ``crash`` / ``restore`` (target = node id).
        """
        if kind in ("partition", "unpartition", "drop"):
            if not isinstance(target, (tuple, list)) or len(target) != 2:
                raise UnknownTarget(f"{kind} needs a node pair")
            key = link_key(*target)
            if key not in self.links:
                raise UnknownTarget(f"no link {target[0]}<->{target[1]}")
            if kind == "drop":
                p = float(value)
                if not 0.0 <= p <= 1.0:
                    raise UnknownTarget("drop probability must lie in [0, 1]")
                self.links[key].drop_prob = p
            else:
                self.links[key].partitioned = kind == "partition"
        elif kind in ("crash", "restore"):
            if target not in self.nodes:
                raise UnknownTarget(f"unknown node {target}")
            if kind == "crash":
                self.crashed.add(target)
            else:
                self.crashed.discard(target)
        else:
            raise UnknownTarget(f"unknown fault kind {kind!r}")

    def counters_json(self) -> dict[str, dict[str, int]]:
        return {f"{a}<->{b}": vars(c).copy() for (a, b), c in sorted(self.counters.items())}


def build_topology(spec: TopologySpec, seed: int = 0) -> Network:
    nodes: dict[str, Node] = {}
    for n in spec.nodes:
        if n.id in nodes:
            raise DuplicateNode(n.id)
        if n.id == BROADCAST:
            raise NetworkError(f"{BROADCAST!r} is reserved")
        nodes[n.id] = n
    links: dict[tuple[str, str], LinkSpec] = {}
    ids = sorted(nodes)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            earth_leg = nodes[a].role.on_earth != nodes[b].role.on_earth
            links[(a, b)] = LinkSpec(
                latency_ms=spec.earth_latency_ms if earth_leg else spec.mesh_latency_ms,
                jitter_ms=spec.jitter_ms,
                bandwidth_bytes_per_sec=spec.bandwidth_bytes_per_sec,
                drop_prob=spec.drop_prob,
            )
    for a, b, ls in spec.links:
        for end in (a, b):
            if end not in nodes:
                raise DanglingLink(f"link {a}<->{b} references unknown node {end}")
        if a == b:
            raise NetworkError(f"self link on {a}")
        links[link_key(a, b)] = replace(ls)
    for (a, b), ls in links.items():
        if nodes[a].role.on_earth != nodes[b].role.on_earth and ls.latency_ms < EARTH_LATENCY_MS:
            raise NetworkError(f"Earth-Moon link {a}<->{b} below {EARTH_LATENCY_MS} ms")
    return Network(nodes, links, seed)


def nodes_from(pairs: Iterable[tuple[str, Role]]) -> list[Node]:
    return [Node(i, r) for i, r in pairs]
