import random
from itertools import chain

import pytest

from block import build_block
from client import DhtParams, OpType
from errors import ConfigError
from keyspace import generate_node_ids
from network import GammaScope, Network, NetworkParams
from organizer import assign_round_robin, select_for_seeding
from workload import (
    BudgetVerdict,
    OriginPolicy,
    SamplingSpec,
    SeedingSpec,
    build_aggregate,
    run_sampling,
    run_seeding,
    seed_block_directly,
    select_sampling_keys,
    slot_budget_check,
)


def _network(n: int = 300, **overrides) -> Network:
    values = {"node_count": n, "fast_error_rate": 0.0}
    values.update(overrides)
    return Network(NetworkParams(**values), generate_node_ids(n, random.Random(11)), k=20)


def _block(rows: int = 8, cols: int = 8):
    return build_block(1, random.Random(5), rows=rows, cols=cols)


def _seeded_sampling(spec: SamplingSpec, net: Network, block):
    keys = select_sampling_keys(spec, block, seed=1)
    seed_block_directly(block, net, 20, keys=chain.from_iterable(keys))
    return run_sampling(spec, block, net, DhtParams(), seed=1, experiment_id="sampling-s1")


def test_slot_budget_check():
    assert slot_budget_check(6000) == slot_budget_check(6000.0)
    budget = slot_budget_check(6000)
    assert budget.verdict is BudgetVerdict.FITS
    assert budget.ratio == 0.5
    budget = slot_budget_check(600_000)
    assert budget.verdict is BudgetVerdict.EXCEEDS
    assert budget.ratio == 50.0
    assert slot_budget_check(12_000).fits
    assert not slot_budget_check(12_001).fits


def test_round_robin_partition_covers_every_sample_once():
    shares = assign_round_robin(list(range(5)), 2)
    assert shares == [[0, 2, 4], [1, 3]]
    shares = assign_round_robin(list(range(100)), 7)
    assert sorted(chain.from_iterable(shares)) == list(range(100))
    with pytest.raises(ValueError):
        assign_round_robin([1], 0)


def test_seeding_selects_row_major_prefix():
    block = _block()
    assert select_for_seeding(block, 3) == [block.sample(0, 0), block.sample(0, 1), block.sample(0, 2)]
    with pytest.raises(ValueError):
        select_for_seeding(block, 65)


def test_seed_block_directly_places_on_true_closest():
    net = _network()
    block = _block(2, 2)
    assert seed_block_directly(block, net, 20) == 4 * 20
    for key in block:
        for node in net.global_closest(key.bits, 20):
            assert net.get_value(node, key.bits) == block.payload(key)


def test_sampling_retrieves_everything_from_a_seeded_block():
    net = _network()
    block = _block()
    spec = SamplingSpec(queries_per_node=10, sets=3)
    result = _seeded_sampling(spec, net, block)

    assert len(result.records) == 30
    assert result.success_rate == 1.0
    assert not result.unseeded
    for set_id, duration in result.set_durations_us.items():
        members = [r for r in result.records if r.set_id == set_id]
        assert len(members) == 10
        assert len({r.start_us for r in members}) == 1
        assert duration == max(r.duration_us for r in members)


def test_single_query_set_duration_is_the_lookup_duration():
    net = _network()
    result = _seeded_sampling(SamplingSpec(queries_per_node=1, sets=1), net, _block())
    assert result.set_durations_us[0] == result.records[0].duration_us


def test_fixed_origin_policy_uses_one_node():
    net = _network()
    result = _seeded_sampling(SamplingSpec(queries_per_node=5, sets=4), net, _block())
    assert len({r.origin for r in result.records}) == 1


def test_per_lookup_origin_policy_spreads_origins():
    net = _network()
    spec = SamplingSpec(queries_per_node=8, sets=3, origin_policy=OriginPolicy.PER_LOOKUP)
    result = _seeded_sampling(spec, net, _block())
    assert result.success_rate == 1.0
    for set_id in range(3):
        origins = [r.origin for r in result.records if r.set_id == set_id]
        assert len(set(origins)) > 1
        assert all(origin in net for origin in origins)


def test_random_origin_policy_uses_one_node_per_set():
    net = _network()
    spec = SamplingSpec(queries_per_node=6, sets=3, origin_policy=OriginPolicy.RANDOM)
    result = _seeded_sampling(spec, net, _block())
    for set_id in range(3):
        assert len({r.origin for r in result.records if r.set_id == set_id}) == 1


def test_persisted_load_slows_the_second_set():
    spec = SamplingSpec(queries_per_node=10, sets=2)
    reset = _seeded_sampling(spec, _network(gamma_ms=1.0, gamma_scope=GammaScope.CALLER), _block())
    persisted = _seeded_sampling(
        spec, _network(gamma_ms=1.0, gamma_scope=GammaScope.CALLER, persist_load=True), _block()
    )
    assert persisted.set_durations_us[0] == reset.set_durations_us[0]
    assert persisted.set_durations_us[1] > reset.set_durations_us[1]
    assert [r.hops for r in persisted.records] == [r.hops for r in reset.records]


def test_closest_node_sets_need_no_seeded_block():
    net = _network()
    spec = SamplingSpec(queries_per_node=5, sets=2, find_value=False)
    result = run_sampling(spec, _block(), net, DhtParams(), seed=1)
    assert result.success_rate == 1.0
    assert all(r.op_type is OpType.LOOKUP_NODES for r in result.records)
    assert all(r.hops >= 1 for r in result.records)


def test_unseeded_block_is_flagged():
    net = _network()
    spec = SamplingSpec(queries_per_node=5, sets=2, origin_policy=OriginPolicy.RANDOM)
    result = run_sampling(spec, _block(), net, DhtParams(), seed=1)
    assert result.success_rate == 0.0
    assert result.unseeded
    aggregate = build_aggregate("sampling", "sampling-s1", {}, result.records, net)
    assert aggregate.unseeded
    assert aggregate.op_count == 10


def test_seeding_conserves_replicas():
    net = _network()
    spec = SeedingSpec(sample_count=40, seeders=1)
    result = run_seeding(spec, _block(), net, DhtParams(), seed=1)

    assert len(result.records) == 40
    assert result.stored_total == sum(len(r.stored_on) for r in result.records) == 40 * 20
    assert result.stored_mean == 40 * 20 / 300
    assert result.replica_distribution == {20: 40}
    assert 0.0 < result.table_member_load_share <= 1.0
    assert result.table_members > 0


def test_single_sample_seeding():
    net = _network()
    result = run_seeding(SeedingSpec(sample_count=1), _block(), net, DhtParams(), seed=1)
    assert result.total_duration_us == result.records[0].duration_us
    assert len(result.records[0].stored_on) == 20
    assert slot_budget_check(result).ratio == result.total_duration_us / 1000 / 12_000


def test_more_seeders_finish_sooner():
    block = _block()
    spec_one = SeedingSpec(sample_count=64, seeders=1)
    spec_many = SeedingSpec(sample_count=64, seeders=8)
    single = run_seeding(spec_one, block, _network(gamma_ms=0.5, gamma_scope=GammaScope.BOTH), DhtParams(), seed=1)
    spread = run_seeding(spec_many, block, _network(gamma_ms=0.5, gamma_scope=GammaScope.BOTH), DhtParams(), seed=1)
    assert spread.total_duration_us < single.total_duration_us
    assert len(set(spread.seeders)) == 8


def test_seeding_rejects_too_many_seeders():
    with pytest.raises(ConfigError):
        run_seeding(SeedingSpec(sample_count=4, seeders=11), _block(), _network(10), DhtParams())


def test_seeding_aggregate():
    net = _network()
    result = run_seeding(SeedingSpec(sample_count=10), _block(), net, DhtParams(), seed=1)
    aggregate = build_aggregate("seeding", "seeding-s1", {"k": 20}, result.records, net, seeding=result)
    assert aggregate.op_count == 10
    assert aggregate.success_rate == 1.0
    assert not aggregate.unseeded
    assert aggregate.seeding["stored_total"] == 200
    assert aggregate.seeding["replicas"] == {"20": 10}
    assert sum(aggregate.load_histogram["counts"]) == 300
    assert aggregate.total_duration_ms == result.total_duration_us / 1000


@pytest.mark.parametrize("factory, key", [
    (lambda: SamplingSpec(queries_per_node=0), "queries_per_node"),
    (lambda: SamplingSpec(sets=0), "sets"),
    (lambda: SeedingSpec(sample_count=0), "sample_count"),
    (lambda: SeedingSpec(seeders=0), "seeders"),
])
def test_invalid_workload_settings(factory, key):
    with pytest.raises(ConfigError) as excinfo:
        factory()
    assert excinfo.value.key == key
