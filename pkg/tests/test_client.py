import random

import pytest

from client import DhtClient, DhtParams, OpType, StopRule, lookup_nodes, lookup_value, provide
from errors import ConfigError, UnknownNodeError
from keyspace import format_id, generate_node_ids
from network import Network, NetworkParams
from routing_table import BucketFill


def _network(n: int, seed: int = 1, k: int = 20, **overrides) -> Network:
    values = {"node_count": n, "fast_error_rate": 0.0}
    values.update(overrides)
    return Network(NetworkParams(**values), generate_node_ids(n, random.Random(seed)), k)


def _batch(gamma_ms: float, stop_rule: StopRule = StopRule.CLOSEST_QUERIED, stall_limit: int = 3,
           bucket_fill: BucketFill = BucketFill.CLOSEST):
    net = _network(400, fast_error_rate=0.10, gamma_ms=gamma_ms, bucket_fill=bucket_fill)
    client = DhtClient(net, DhtParams(stop_rule=stop_rule, stall_limit=stall_limit), seed=3)
    rng = random.Random(4)
    origin = net.ids[0]
    for _ in range(60):
        client.start_lookup(origin, rng.getrandbits(256), find_value=False)
    net.clock.run()
    return client.records


def test_two_node_network_finds_peer_in_one_hop():
    net = _network(2)
    a, b = net.ids
    found, record = lookup_nodes(a, 12345, DhtParams(), net)
    assert found == [b]
    assert record.hops == 1
    assert record.success
    assert record.end_us >= record.start_us


def test_lookup_nodes_matches_global_closest():
    net = _network(500)
    client = DhtClient(net, DhtParams(), seed=5)
    rng = random.Random(99)
    for _ in range(200):
        origin = rng.choice(net.ids)
        key = rng.getrandbits(256)
        found, record = client.lookup_nodes(origin, key)
        assert found == net.global_closest(key, 20, exclude=origin)
        assert record.op_type is OpType.LOOKUP_NODES


def test_provided_value_is_retrievable():
    net = _network(300)
    rng = random.Random(6)
    key = rng.getrandbits(256)
    origin, reader = net.ids[3], net.ids[4]

    stored_on, record = provide(origin, key, b"x" * 560, DhtParams(), net)
    assert sorted(stored_on) == sorted(net.global_closest(key, 20, exclude=origin))
    assert record.success
    assert record.to_row().replicas == 20
    assert record.to_row().key_hex == format_id(key)
    assert record.to_row().origin_hex == format_id(origin)

    value, read = lookup_value(reader, key, DhtParams(), net, seed=1)
    assert value == b"x" * 560
    assert read.success
    assert read.to_row().replicas is None


@pytest.mark.parametrize("bucket_fill", list(BucketFill))
def test_provided_value_is_retrievable_from_100_origins(bucket_fill):
    net = _network(300, bucket_fill=bucket_fill)
    key = random.Random(7).getrandbits(256)
    seeder = net.ids[0]
    stored_on, _ = provide(seeder, key, b"cell", DhtParams(), net)
    assert len(stored_on) == 20

    client = DhtClient(net, DhtParams(), seed=8)
    readers = [node for node in net.ids if node != seeder][:100]
    for reader in readers:
        value, record = client.lookup_value(reader, key)
        assert value == b"cell"
        assert record.success
        assert record.failed_fast == 0


def test_stalled_provide_still_stores_k_replicas():
    net = _network(400)
    key = random.Random(9).getrandbits(256)
    params = DhtParams(stop_rule=StopRule.STALLED, stall_limit=1)
    stored_on, record = provide(net.ids[0], key, b"cell", params, net)
    assert len(stored_on) == 20
    assert record.success
    assert record.contacted == record.hops


def test_lookup_value_of_missing_key():
    net = _network(100)
    value, record = lookup_value(net.ids[0], 42, DhtParams(), net)
    assert value is None
    assert not record.success
    assert record.hops >= 1


def test_lookup_value_held_locally_takes_no_hops():
    net = _network(50)
    net.store(net.ids[0], 42, b"v")
    value, record = lookup_value(net.ids[0], 42, DhtParams(), net)
    assert value == b"v"
    assert record.hops == 0
    assert record.duration_us == 0


def test_hops_do_not_depend_on_gamma():
    plain = _batch(0.0)
    loaded = _batch(0.1)
    assert [r.hops for r in plain] == [r.hops for r in loaded]
    assert [r.failed_fast for r in plain] == [r.failed_fast for r in loaded]
    assert all(b.end_us >= a.end_us for a, b in zip(plain, loaded))
    assert sum(r.duration_us for r in loaded) > sum(r.duration_us for r in plain)


def test_record_arithmetic():
    for record in _batch(0.05):
        assert record.contacted == record.hops
        assert record.failed_fast + record.failed_slow <= record.contacted
        assert record.end_us >= record.start_us
        assert record.finished


def test_stalled_rule_never_takes_more_hops():
    classic = _batch(0.0)
    stalled = _batch(0.0, StopRule.STALLED)
    assert all(s.hops <= c.hops for s, c in zip(stalled, classic))
    assert sum(s.hops for s in stalled) < sum(c.hops for c in classic)


def test_higher_stall_limit_only_extends_lookups():
    short = _batch(0.0, StopRule.STALLED, stall_limit=2)
    longer = _batch(0.0, StopRule.STALLED, stall_limit=4)
    assert all(a.hops <= b.hops for a, b in zip(short, longer))
    assert sum(a.hops for a in short) < sum(b.hops for b in longer)


def test_random_fill_lookups_keep_gamma_invariance():
    plain = _batch(0.0, StopRule.STALLED, stall_limit=4, bucket_fill=BucketFill.RANDOM)
    loaded = _batch(0.2, StopRule.STALLED, stall_limit=4, bucket_fill=BucketFill.RANDOM)
    assert [r.hops for r in plain] == [r.hops for r in loaded]
    assert all(r.success for r in plain)


def test_op_ids_are_sequential():
    records = _batch(0.0)
    assert [r.op_id for r in records] == list(range(60))


def test_unknown_origin_raises():
    net = _network(20)
    with pytest.raises(UnknownNodeError):
        lookup_nodes(12345, 1, DhtParams(), net)


@pytest.mark.parametrize("overrides, key", [
    ({"k": 0}, "k"),
    ({"alpha": 0}, "alpha"),
    ({"beta": 0}, "beta"),
    ({"beta": 1000}, "beta"),
    ({"stall_limit": 0}, "stall_limit"),
])
def test_invalid_dht_params(overrides, key):
    with pytest.raises(ConfigError) as excinfo:
        DhtParams(**overrides)
    assert excinfo.value.key == key
