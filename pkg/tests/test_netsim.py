import math
import random

import pytest

from lunamarket.errors import DanglingLink, DuplicateNode, NetworkError, UnknownNode, UnknownTarget
from lunamarket.netsim import (
    BROADCAST,
    EARTH_LATENCY_MS,
    MESH_LATENCY_MS,
    LinkSpec,
    Message,
    Node,
    Role,
    TopologySpec,
    build_topology,
    envelope,
)

NODES = [Node("earth", Role.EARTH_STATION), Node("seq", Role.SEQUENCER),
         Node("r1", Role.ROBOT), Node("r2", Role.ROBOT), Node("r3", Role.ROBOT)]


def net(seed=0, **kw):
    return build_topology(TopologySpec(list(NODES), **kw), seed)


def drain(n, until=10**9):
    return n.step(until)


def test_default_latencies():
    n = net()
    n.send(envelope("earth", "seq", Message("JobRequestMsg"), 100))
    n.send(envelope("r1", "r2", Message("BidMsg"), 100))
    got = {(e.envelope.src, e.envelope.dst): e.time_ms for e in drain(n)}
    assert got == {("earth", "seq"): 100 + EARTH_LATENCY_MS, ("r1", "r2"): 100 + MESH_LATENCY_MS}


def test_earth_links_never_faster_than_floor():
    with pytest.raises(NetworkError):
        net(links=[("earth", "r1", LinkSpec(latency_ms=4999))])
    with pytest.raises(NetworkError):
        net(earth_latency_ms=1000)


def test_default_message_sizes():
    assert envelope("a", "b", Message("JobRequestMsg"), 0).size_bytes == 2048
    assert envelope("a", "b", Message("BidMsg"), 0).size_bytes == 256
    assert envelope("a", "b", Message("ContractMsg"), 0).size_bytes == 512
    assert envelope("a", "b", Message("DeliverableMsg"), 0, 4_700_000).size_bytes == 4_700_000


def test_broadcast_reaches_every_other_robot():
    n = net()
    n.send(envelope("r1", BROADCAST, Message("BidMsg"), 0))
    assert sorted(e.envelope.dst for e in drain(n)) == ["r2", "r3"]
    n.send(envelope("seq", BROADCAST, Message("JobRequestMsg"), 0))
    assert sorted(e.envelope.dst for e in drain(n)) == ["r1", "r2", "r3"]


def test_jitter_and_drops_follow_documented_draws():
    seed, jitter, p = 77, 40, 0.3
    n = net(seed, jitter_ms=jitter, drop_prob=p)
    oracle = random.Random(seed)
    expected = []
    for i in range(200):
        u, j = oracle.random(), oracle.randint(0, jitter)
        if u >= p:
            expected.append((i, i + MESH_LATENCY_MS + j))
        n.send(envelope("r1", "r2", Message("BidMsg", {"i": i}), i))
    got = sorted((e.envelope.payload.body["i"], e.time_ms) for e in drain(n))
    assert got == expected
    c = n.counters[("r1", "r2")]
    assert c.delivered_count == len(expected)
    assert c.dropped_count == 200 - len(expected)


def test_same_seed_same_schedule_different_seed_differs():
    def schedule(seed):
        n = net(seed, jitter_ms=100)
        for i in range(50):
            n.send(envelope("r1", "r3", Message("BidMsg"), i))
        return [e.time_ms for e in drain(n)]

    assert schedule(1) == schedule(1)
    assert schedule(1) != schedule(2)


def test_bandwidth_adds_serialization_delay():
    n = net(links=[("r1", "seq", LinkSpec(latency_ms=50, bandwidth_bytes_per_sec=1000))])
    n.send(envelope("r1", "seq", Message("DeliverableMsg"), 0, size_bytes=2500))
    assert drain(n)[0].time_ms == 50 + math.ceil(2500 * 1000 / 1000)


def test_partition_at_send_and_in_flight():
    n = net()
    n.inject_fault("partition", ("r1", "r2"))
    n.send(envelope("r1", "r2", Message("BidMsg"), 0))
    assert drain(n) == []
    n.inject_fault("unpartition", ("r1", "r2"))
    n.send(envelope("r1", "r2", Message("BidMsg"), 0))
    n.inject_fault("partition", ("r1", "r2"))  # while in flight
    assert drain(n) == []
    assert n.counters[("r1", "r2")].dropped_count == 2
    assert [reason for _, reason in n.dropped] == ["partitioned", "partitioned"]


def test_crash_and_restore():
    n = net()
    n.inject_fault("crash", "r2")
    n.send(envelope("r1", "r2", Message("BidMsg"), 0))
    n.send(envelope("r2", "r1", Message("BidMsg"), 0))  # crashed nodes send nothing
    assert drain(n) == []
    n.inject_fault("restore", "r2")
    n.send(envelope("r1", "r2", Message("BidMsg"), 2000))
    assert len(drain(n)) == 1


def test_drop_fault_sets_probability():
    n = net()
    n.inject_fault("drop", ("r1", "r2"), 1.0)
    n.send(envelope("r1", "r2", Message("BidMsg"), 0))
    assert drain(n) == []
    assert n.dropped[0][1] == "lost"


def test_fault_target_errors():
    n = net()
    with pytest.raises(UnknownTarget):
        n.inject_fault("crash", "ghost")
    with pytest.raises(UnknownTarget):
        n.inject_fault("partition", "r1")
    with pytest.raises(UnknownTarget):
        n.inject_fault("explode", "r1")
    with pytest.raises(UnknownTarget):
        n.inject_fault("drop", ("r1", "r2"), 2.0)


def test_topology_errors():
    with pytest.raises(DuplicateNode):
        build_topology(TopologySpec([Node("a", Role.ROBOT), Node("a", Role.ROBOT)]))
    with pytest.raises(DanglingLink):
        net(links=[("r1", "ghost", LinkSpec(latency_ms=1))])
    n = net()
    with pytest.raises(UnknownNode):
        n.send(envelope("ghost", "r1", Message("BidMsg"), 0))
    with pytest.raises(UnknownNode):
        n.send(envelope("r1", "ghost", Message("BidMsg"), 0))


def test_link_spec_validation():
    with pytest.raises(NetworkError):
        LinkSpec(latency_ms=-1)
    with pytest.raises(NetworkError):
        LinkSpec(latency_ms=1, drop_prob=1.5)
    with pytest.raises(NetworkError):
        envelope("a", "b", Message("BidMsg"), 0, size_bytes=0)


def test_counters_equal_sum_of_delivered_sizes():
    n = net(7, jitter_ms=30, drop_prob=0.2)
    rng = random.Random(1)
    delivered = {}
    ids = [x.id for x in NODES]
    for t in range(300):
        a, b = rng.sample(ids, 2)
        size = rng.randint(1, 5000)
        n.send(envelope(a, b, Message("LedgerTxMsg"), t, size))
        for ev in n.step(t):
            delivered[ev.link] = delivered.get(ev.link, 0) + ev.envelope.size_bytes
    for ev in drain(n):
        delivered[ev.link] = delivered.get(ev.link, 0) + ev.envelope.size_bytes
    for key, c in n.counters.items():
        assert c.delivered_bytes == delivered.get(key, 0)


def test_cannot_step_backwards():
    n = net()
    n.step(100)
    with pytest.raises(NetworkError):
        n.step(50)


def test_delivery_order_is_time_then_send_order():
    n = net()
    n.send(envelope("r1", "r2", Message("BidMsg", {"k": 0}), 10))
    n.send(envelope("r3", "r2", Message("BidMsg", {"k": 1}), 10))
    n.send(envelope("r1", "r2", Message("BidMsg", {"k": 2}), 5))
    assert [e.envelope.payload.body["k"] for e in drain(n)] == [2, 0, 1]
