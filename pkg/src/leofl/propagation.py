"""Ring-of-stars model propagation: global-model relay along the platform
ring, intra-orbit relay with the duplicate-cease rule, local-update routing
back to a platform, buffer forwarding to the sink, and role swapping.

Planners are pure: network specifics enter through caller-supplied delay and
visibility callbacks, so the same logic serves both unit tests and the
discrete-event engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

from .aggregation import LocalUpdate
from .orbital import NodeSpec, SatelliteId

GLOBAL_MODEL = "GlobalModel"
LOCAL_UPDATE = "LocalUpdate"
BUNDLE = "Bundle"

#: delay callback signature: (src_label, dst_label, payload_bits, send_time) -> seconds
DelayFn = Callable[[str, str, float, float], float]


@dataclass(frozen=True)
class TimedMessage:
    kind: str
    payload_bits: float
    src: str
    dst: str
    send_time: float
    arrive_time: float
    detail: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.arrive_time <= self.send_time:
            raise ValueError("messages must arrive strictly after they are sent")


@dataclass(frozen=True)
class HapRing:
    """Platform ring ordered by longitude, with designated source and sink."""

    order: tuple[str, ...]
    source: str
    sink: str

    def __post_init__(self) -> None:
        if not self.order:
            raise ValueError("ring needs at least one platform")
        if len(set(self.order)) != len(self.order):
            raise ValueError("ring platform ids must be unique")
        if self.source not in self.order or self.sink not in self.order:
            raise ValueError("source and sink must sit on the ring")
        if len(self.order) >= 2 and self.source == self.sink:
            raise ValueError("source and sink must differ on a multi-platform ring")

    @property
    def size(self) -> int:
        return len(self.order)

    def index(self, node: str) -> int:
        return self.order.index(node)

    def neighbors(self, node: str) -> tuple[str, str]:
        i = self.index(node)
        n = self.size
        return self.order[(i - 1) % n], self.order[(i + 1) % n]

    def hop_distance(self, a: str, b: str) -> int:
        d = abs(self.index(a) - self.index(b))
        return min(d, self.size - d)


@dataclass
class RelayState:
    """Mutable protocol state: per-satellite version bookkeeping and per-platform
    local-update buffers."""

    latest_version: dict[SatelliteId, int] = field(default_factory=dict)
    received_from: dict[SatelliteId, set[str]] = field(default_factory=dict)
    relaying: dict[SatelliteId, bool] = field(default_factory=dict)
    hap_buffers: dict[str, list[LocalUpdate]] = field(default_factory=dict)

    def note_receipt(self, sat: SatelliteId, version: int, src: str) -> bool:
        """Record a global-model receipt; True iff `version` is new for `sat`."""
        self.received_from.setdefault(sat, set()).add(src)
        if version > self.latest_version.get(sat, -1):
            self.latest_version[sat] = version
            return True
        return False


def plan_ring(haps: list[NodeSpec]) -> HapRing:
    """Order platforms by longitude; source is first, sink is the farthest
    around the ring (half the ring away)."""
    if not haps:
        raise ValueError("need at least one platform or ground station")
    ordered = tuple(n.id for n in sorted(haps, key=lambda n: (n.longitude, n.id)))
    return HapRing(order=ordered, source=ordered[0],
                   sink=ordered[len(ordered) // 2])


def _relay_tree(ring: HapRing, root: str) -> list[tuple[str, str, int]]:
    """Ring dissemination edges (src, dst, hop) so every platform is reached
    exactly once: each node receives from its shorter side (never through the
    sink, which stops relaying), ties from the clockwise arc."""
    n = ring.size
    if n == 1:
        return []
    root_i = ring.index(root)
    sink_cw = (ring.index(ring.sink) - root_i) % n
    sink_ccw = (root_i - ring.index(ring.sink)) % n
    edges = []
    for node in ring.order:
        if node == root:
            continue
        i = ring.index(node)
        cw = (i - root_i) % n        # hops walking +1 from root
        ccw = (root_i - i) % n       # hops walking -1 from root
        cw_ok = cw <= sink_cw        # arc does not pass through the sink
        ccw_ok = ccw <= sink_ccw
        if cw_ok and (not ccw_ok or cw <= ccw):
            prev = ring.order[(i - 1) % n]
            edges.append((prev, node, cw))
        else:
            nxt = ring.order[(i + 1) % n]
            edges.append((nxt, node, ccw))
    edges.sort(key=lambda e: (e[2], ring.index(e[1])))
    return edges


def relay_global_hap(ring: HapRing, version: int, t: float, *,
                     payload_bits: float, delay_fn: DelayFn,
                     visible_fn: Callable[[str, float], list[SatelliteId]] | None = None,
                     ) -> list[TimedMessage]:
    """Disseminate a global model from the ring source.

    Returns the ring relay messages (each platform handles the model exactly
    once, the sink never forwards) followed by each platform's broadcast to
    the satellites `visible_fn` reports at its handling time.
    """
    handle_time = {ring.source: t}
    messages: list[TimedMessage] = []
    for src, dst, _hop in _relay_tree(ring, ring.source):
        send = handle_time[src]
        arrive = send + delay_fn(src, dst, payload_bits, send)
        handle_time[dst] = arrive
        messages.append(TimedMessage(GLOBAL_MODEL, payload_bits, src, dst,
                                     send, arrive, {"version": version}))
    if visible_fn is not None:
        for hap in ring.order:
            send = handle_time[hap]
            for sat in visible_fn(hap, send):
                arrive = send + delay_fn(hap, sat.label, payload_bits, send)
                messages.append(TimedMessage(GLOBAL_MODEL, payload_bits, hap,
                                             sat.label, send, arrive,
                                             {"version": version}))
    return messages


def intra_orbit_relay(orbit: int, num_sats: int, seeded_slots: Iterable[int],
                      version: int, *, t: float = 0.0, hop_delay: float = 1.0,
                      payload_bits: float = 0.0) -> list[TimedMessage]:
    """Flood a global model around one orbit's ring from the seeded satellites.

    Every satellite forwards to both neighbors on its first receipt and never
    re-forwards, so the relay ceases where fronts meet and the schedule holds
    at most 2 * num_sats messages. Seeds count as having received at time t.
    """
    seeds = sorted(set(seeded_slots))
    if any(s < 0 or s >= num_sats for s in seeds):
        raise ValueError("seed slots must index satellites of the orbit")
    if not seeds or num_sats == 1:
        return []
    if hop_delay <= 0:
        raise ValueError("hop_delay must be positive")
    received = {s: t for s in seeds}
    messages: list[TimedMessage] = []
    frontier = list(seeds)
    while frontier:
        next_frontier = []
        for slot in frontier:
            send = received[slot]
            for nb in ((slot - 1) % num_sats, (slot + 1) % num_sats):
                arrive = send + hop_delay
                messages.append(TimedMessage(
                    GLOBAL_MODEL, payload_bits,
                    SatelliteId(orbit, slot).label, SatelliteId(orbit, nb).label,
                    send, arrive, {"version": version}))
                if nb not in received:
                    received[nb] = arrive
                    next_frontier.append(nb)
        frontier = sorted(set(next_frontier))
    return messages


@dataclass(frozen=True)
class RoutePlan:
    """Outcome of routing one local update toward a platform."""

    messages: tuple[TimedMessage, ...]
    delivered_to: tuple[str, ...]        # platforms reached (possibly both fronts)

    @property
    def delivered(self) -> bool:
        return bool(self.delivered_to)


def route_local_update(sat: SatelliteId, t: float, *, num_sats: int,
                       payload_bits: float,
                       visible_haps: Callable[[SatelliteId, float], list[str]],
                       uplink_delay: Callable[[SatelliteId, str, float], float],
                       hop_delay: float,
                       pick: Callable[[list[str]], str] | None = None,
                       ) -> RoutePlan:
    """Plan the delivery of `sat`'s local update finished at time t.

    A directly visible satellite uploads straight away (`pick` chooses among
    several platforms). Otherwise the update travels outward through both
    neighbors in lockstep; the relay stops at the first hop depth where a
    front reaches a visible satellite (which uploads), or once the fronts
    have met after ceil(num_sats / 2) hops.
    """
    pick = pick or (lambda hs: hs[0])
    messages: list[TimedMessage] = []
    delivered: list[str] = []

    def try_upload(slot: int, when: float) -> bool:
        here = SatelliteId(sat.orbit_index, slot)
        haps = visible_haps(here, when)
        if not haps:
            return False
        hap = pick(sorted(haps)) if len(haps) > 1 else haps[0]
        messages.append(TimedMessage(
            LOCAL_UPDATE, payload_bits, here.label, hap,
            when, when + uplink_delay(here, hap, when),
            {"origin": sat.label}))
        delivered.append(hap)
        return True

    if try_upload(sat.slot_index, t) or num_sats == 1:
        return RoutePlan(tuple(messages), tuple(delivered))

    hop_cap = math.ceil(num_sats / 2)
    fronts = {-1: (sat.slot_index, t), +1: (sat.slot_index, t)}
    for _depth in range(hop_cap):
        for direction in sorted(fronts):
            slot, when = fronts[direction]
            nxt = (slot + direction) % num_sats
            arrive = when + hop_delay
            messages.append(TimedMessage(
                LOCAL_UPDATE, payload_bits,
                SatelliteId(sat.orbit_index, slot).label,
                SatelliteId(sat.orbit_index, nxt).label,
                when, arrive, {"origin": sat.label}))
            fronts[direction] = (nxt, arrive)
        uploaded = [d for d in sorted(fronts) if try_upload(*fronts[d])]
        if uploaded:
            break
    return RoutePlan(tuple(messages), tuple(delivered))


def forward_buffers_to_sink(ring: HapRing, buffers: dict[str, int], t: float, *,
                            bundle_bits: Callable[[str], float],
                            delay_fn: DelayFn) -> list[TimedMessage]:
    """Relay each non-sink platform's buffered bundle hop-by-hop to the sink
    along its shorter ring arc (ties clockwise). `buffers` maps platform id to
    its buffered update count; empty buffers still emit a (header-sized)
    bundle so the sink can account for every platform."""
    messages: list[TimedMessage] = []
    n = ring.size
    sink_i = ring.index(ring.sink)
    for hap in ring.order:
        if hap == ring.sink or hap not in buffers:
            continue
        i = ring.index(hap)
        cw = (sink_i - i) % n
        ccw = (i - sink_i) % n
        step = 1 if cw <= ccw else -1
        bits = bundle_bits(hap)
        when = t
        pos = i
        while pos != sink_i:
            nxt = (pos + step) % n
            src, dst = ring.order[pos], ring.order[nxt]
            arrive = when + delay_fn(src, dst, bits, when)
            messages.append(TimedMessage(BUNDLE, bits, src, dst, when, arrive,
                                         {"origin": hap,
                                          "count": buffers[hap]}))
            pos, when = nxt, arrive
    return messages


def swap_roles(ring: HapRing) -> HapRing:
    """Exchange source and sink for the next epoch's reverse dissemination."""
    return replace(ring, source=ring.sink, sink=ring.source)
