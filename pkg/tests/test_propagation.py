import math

import numpy as np
import pytest

from leofl.aggregation import LocalUpdate, SatMetadata
from leofl.fl_core import ModelParams
from leofl.orbital import NodeSpec, SatelliteId
from leofl.propagation import (HapRing, RelayState, TimedMessage,
                               forward_buffers_to_sink, intra_orbit_relay,
                               plan_ring, relay_global_hap, route_local_update,
                               swap_roles)


def nodes(n):
    return [NodeSpec(id=f"h{i}", longitude=float(i)) for i in range(n)]


def unit_delay(src, dst, bits, t):
    return 1.0


def slot_of(label):
    return int(label.split("-")[2])


def first_receipts(messages, seeds, t0=0.0):
    """slot -> first arrival time, with seeds informed at t0."""
    first = {s: t0 for s in seeds}
    for m in sorted(messages, key=lambda m: m.arrive_time):
        s = slot_of(m.dst)
        if s not in first:
            first[s] = m.arrive_time
    return first


class TestPlanRing:
    def test_single_node(self):
        ring = plan_ring(nodes(1))
        assert ring.source == ring.sink == "h0"
        assert ring.size == 1

    def test_two_haps(self):
        ring = plan_ring(nodes(2))
        assert ring.source == "h0" and ring.sink == "h1"
        assert ring.neighbors("h0") == ("h1", "h1")

    def test_four_haps_sink_two_hops(self):
        ring = plan_ring(nodes(4))
        assert ring.hop_distance(ring.source, ring.sink) == 2

    def test_ordered_by_longitude(self):
        shuffled = [NodeSpec(id="b", longitude=2.0), NodeSpec(id="a", longitude=-1.0),
                    NodeSpec(id="c", longitude=0.5)]
        ring = plan_ring(shuffled)
        assert ring.order == ("a", "c", "b")

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            plan_ring([])


class TestRelayGlobalHap:
    def test_single_hap_no_ring_messages(self):
        ring = plan_ring(nodes(1))
        msgs = relay_global_hap(ring, 0, 0.0, payload_bits=1.0,
                                delay_fn=unit_delay)
        assert msgs == []

    def test_single_hap_broadcast_only(self):
        ring = plan_ring(nodes(1))
        sats = [SatelliteId(0, 0), SatelliteId(0, 1)]
        msgs = relay_global_hap(ring, 3, 5.0, payload_bits=1.0,
                                delay_fn=unit_delay,
                                visible_fn=lambda h, t: sats)
        assert [(m.src, m.dst) for m in msgs] == [("h0", "sat-0-0"), ("h0", "sat-0-1")]
        assert all(m.detail["version"] == 3 for m in msgs)

    def test_four_ring_three_transmissions(self):
        ring = plan_ring(nodes(4))
        msgs = relay_global_hap(ring, 0, 0.0, payload_bits=1.0,
                                delay_fn=unit_delay)
        assert len(msgs) == 3
        handled = {ring.source} | {m.dst for m in msgs}
        assert handled == set(ring.order)
        # each platform receives at most once
        assert len({m.dst for m in msgs}) == 3

    def test_sink_never_forwards(self):
        for n in (2, 3, 4, 5, 7):
            ring = plan_ring(nodes(n))
            msgs = relay_global_hap(ring, 0, 0.0, payload_bits=1.0,
                                    delay_fn=unit_delay)
            assert all(m.src != ring.sink for m in msgs)

    def test_two_ring_swap_reverses_sequence(self):
        ring = plan_ring(nodes(2))
        fwd = relay_global_hap(ring, 0, 0.0, payload_bits=1.0, delay_fn=unit_delay)
        rev = relay_global_hap(swap_roles(ring), 1, 10.0, payload_bits=1.0,
                               delay_fn=unit_delay)
        assert [(m.src, m.dst) for m in fwd] == [("h0", "h1")]
        assert [(m.src, m.dst) for m in rev] == [("h1", "h0")]

    def test_swap_is_involution(self):
        ring = plan_ring(nodes(5))
        assert swap_roles(swap_roles(ring)) == ring
        single = plan_ring(nodes(1))
        assert swap_roles(single) == single


class TestIntraOrbitRelay:
    def test_four_seed_twelve_ring(self):
        msgs = intra_orbit_relay(0, 12, [1, 4, 7, 10], version=0, hop_delay=1.0)
        first = first_receipts(msgs, [1, 4, 7, 10])
        assert len(first) == 12
        assert max(first.values()) <= 2.0          # everyone within 2 hops
        assert len(msgs) <= 2 * 12

    def test_single_seed_eight_ring(self):
        msgs = intra_orbit_relay(0, 8, [0], version=1, hop_delay=1.0)
        first = first_receipts(msgs, [0])
        assert len(first) == 8
        assert max(first.values()) == math.ceil((8 - 1) / 2)

    def test_full_seed_saturation(self):
        msgs = intra_orbit_relay(0, 6, range(6), version=0, hop_delay=1.0)
        # every satellite already informed: messages exist but inform nobody new
        first = first_receipts(msgs, range(6))
        assert all(t == 0.0 for t in first.values())
        assert len(msgs) <= 2 * 6

    def test_empty_seed_set(self):
        assert intra_orbit_relay(0, 8, [], version=0) == []

    def test_termination_and_exactly_once(self):
        rng = np.random.default_rng(5)
        for num in range(3, 17):
            for _ in range(20):
                k = int(rng.integers(1, num + 1))
                seeds = rng.choice(num, size=k, replace=False).tolist()
                msgs = intra_orbit_relay(0, num, seeds, version=0, hop_delay=1.0)
                assert len(msgs) <= 2 * num
                first = first_receipts(msgs, seeds)
                assert len(first) == num


class TestRouteLocalUpdate:
    def test_direct_upload(self):
        plan = route_local_update(
            SatelliteId(0, 2), 0.0, num_sats=8, payload_bits=1.0,
            visible_haps=lambda s, t: ["h0"] if s.slot_index == 2 else [],
            uplink_delay=lambda s, h, t: 0.5, hop_delay=0.1)
        assert plan.delivered_to == ("h0",)
        assert [(m.src, m.dst) for m in plan.messages] == [("sat-0-2", "h0")]

    def test_one_hop_neighbor(self):
        plan = route_local_update(
            SatelliteId(0, 2), 0.0, num_sats=8, payload_bits=1.0,
            visible_haps=lambda s, t: ["h0"] if s.slot_index == 3 else [],
            uplink_delay=lambda s, h, t: 0.5, hop_delay=0.1)
        assert plan.delivered
        pairs = [(m.src, m.dst) for m in plan.messages]
        assert ("sat-0-2", "sat-0-3") in pairs
        assert ("sat-0-3", "h0") in pairs
        # relay stops at the first delivering hop depth
        assert len(plan.messages) == 3

    def test_no_visibility_holds_update(self):
        plan = route_local_update(
            SatelliteId(0, 2), 0.0, num_sats=8, payload_bits=1.0,
            visible_haps=lambda s, t: [],
            uplink_delay=lambda s, h, t: 0.5, hop_delay=0.1)
        assert not plan.delivered
        # both fronts ran to the hop cap
        assert len(plan.messages) == 2 * math.ceil(8 / 2)

    def test_multiple_haps_uses_pick(self):
        chosen = []
        plan = route_local_update(
            SatelliteId(0, 0), 0.0, num_sats=4, payload_bits=1.0,
            visible_haps=lambda s, t: ["h1", "h0"],
            uplink_delay=lambda s, h, t: 0.5, hop_delay=0.1,
            pick=lambda hs: chosen.append(tuple(hs)) or hs[-1])
        assert chosen == [("h0", "h1")]
        assert plan.delivered_to == ("h1",)


class TestForwardBuffers:
    def test_single_hap_no_messages(self):
        ring = plan_ring(nodes(1))
        assert forward_buffers_to_sink(ring, {}, 0.0,
                                       bundle_bits=lambda h: 8.0,
                                       delay_fn=unit_delay) == []

    def test_two_haps_one_bundle(self):
        ring = plan_ring(nodes(2))
        msgs = forward_buffers_to_sink(ring, {"h0": 4}, 0.0,
                                       bundle_bits=lambda h: 8.0,
                                       delay_fn=unit_delay)
        assert [(m.src, m.dst) for m in msgs] == [("h0", "h1")]
        assert msgs[0].detail["count"] == 4

    def test_shorter_arc(self):
        ring = HapRing(order=("a", "b", "c", "d", "e"), source="a", sink="c")
        msgs = forward_buffers_to_sink(ring, {"b": 1, "d": 2, "e": 3}, 0.0,
                                       bundle_bits=lambda h: 1.0,
                                       delay_fn=unit_delay)
        paths = {}
        for m in msgs:
            paths.setdefault(m.detail["origin"], []).append((m.src, m.dst))
        assert paths["b"] == [("b", "c")]
        assert paths["d"] == [("d", "c")]
        assert paths["e"] == [("e", "d"), ("d", "c")]

    def test_union_reaches_sink(self):
        ring = plan_ring(nodes(3))
        buffers = {"h0": 2, "h2": 5} if ring.sink == "h1" else {"h1": 2, "h2": 5}
        msgs = forward_buffers_to_sink(ring, buffers, 0.0,
                                       bundle_bits=lambda h: 1.0,
                                       delay_fn=unit_delay)
        arrived = {m.detail["origin"]: m.detail["count"] for m in msgs
                   if m.dst == ring.sink}
        assert arrived == buffers


class TestTimedMessage:
    def test_causality_enforced(self):
        with pytest.raises(ValueError):
            TimedMessage("GlobalModel", 1.0, "a", "b", 5.0, 5.0)

    def test_relay_state_version_monotone(self):
        state = RelayState()
        sat = SatelliteId(0, 0)
        assert state.note_receipt(sat, 1, "h0")
        assert not state.note_receipt(sat, 0, "h1")
        assert not state.note_receipt(sat, 1, "h1")
        assert state.note_receipt(sat, 2, "h0")
        assert state.latest_version[sat] == 2
        assert state.received_from[sat] == {"h0", "h1"}
