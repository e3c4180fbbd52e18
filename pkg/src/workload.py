"""Workload module: DAS sampling and seeding experiments over the simulated DHT."""
import sys
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from itertools import chain
from typing import Any, Callable, Dict, Iterable, List, Optional, Union

from rich.console import Console

from block import DasBlock
from client import DhtClient, DhtParams, OpRecord
from draws import seeded_rng
from errors import ConfigError
from hasher import SampleKey
from keyspace import NodeId
from metrics import ExperimentAggregate, load_histogram, record_metrics, set_durations_us
from network import Network
from organizer import assign_round_robin, select_for_sampling, select_for_seeding

console = Console(legacy_windows=(sys.platform == "win32"))

SLOT_MS = 12_000

OpCallback = Optional[Callable[[OpRecord], None]]


class OriginPolicy(Enum):
    """Which node issues the lookups of a sampling set."""
    FIXED = "fixed"             # one node for every set
    RANDOM = "random"           # a fresh node per set
    PER_LOOKUP = "per-lookup"   # a fresh node per lookup


@dataclass(frozen=True)
class SamplingSpec:
    """Sets of concurrent lookups; find_value=False asks only for the closest nodes."""
    queries_per_node: int = 80
    sets: int = 100
    origin_policy: OriginPolicy = OriginPolicy.FIXED
    find_value: bool = True

    def __post_init__(self):
        if self.queries_per_node < 1:
            raise ConfigError("queries_per_node", f"must be >= 1, got {self.queries_per_node}")
        if self.sets < 1:
            raise ConfigError("sets", f"must be >= 1, got {self.sets}")


@dataclass(frozen=True)
class SeedingSpec:
    sample_count: int = 262_144
    seeders: int = 1

    def __post_init__(self):
        if self.sample_count < 1:
            raise ConfigError("sample_count", f"must be >= 1, got {self.sample_count}")
        if self.seeders < 1:
            raise ConfigError("seeders", f"must be >= 1, got {self.seeders}")


@dataclass
class SamplingResult:
    records: List[OpRecord]
    set_durations_us: Dict[int, int]
    success_rate: float

    @property
    def unseeded(self) -> bool:
        """No lookup of any set found its sample."""
        return self.success_rate == 0.0


@dataclass
class SeedingResult:
    records: List[OpRecord]
    seeders: List[NodeId]
    total_duration_us: int
    stored_counts: Dict[NodeId, int]
    replica_distribution: Dict[int, int]
    table_members: int
    table_member_load_share: float
    table_member_mean_load: float
    other_mean_load: float

    @property
    def stored_total(self) -> int:
        return sum(self.stored_counts.values())

    @property
    def stored_mean(self) -> float:
        return self.stored_total / len(self.stored_counts)

    def summary(self) -> Dict[str, Any]:
        return {
            "seeders": len(self.seeders),
            "provides": len(self.records),
            "stored_total": self.stored_total,
            "stored_mean": self.stored_mean,
            "replicas": {str(n): count for n, count in sorted(self.replica_distribution.items())},
            "table_members": self.table_members,
            "table_member_load_share": self.table_member_load_share,
            "table_member_mean_load": self.table_member_mean_load,
            "other_mean_load": self.other_mean_load,
        }


class BudgetVerdict(Enum):
    FITS = "fits"
    EXCEEDS = "exceeds"


@dataclass(frozen=True)
class SlotBudget:
    verdict: BudgetVerdict
    ratio: float

    @property
    def fits(self) -> bool:
        return self.verdict is BudgetVerdict.FITS


def slot_budget_check(total: Union[ExperimentAggregate, SamplingResult, SeedingResult, float],
                      slot_ms: float = SLOT_MS) -> SlotBudget:
    """
    Compare an experiment's total duration with the slot time.

    Accepts an aggregate, a workload result, or a duration in milliseconds.
    A ratio of exactly 1.0 still fits.

    Examples:
        6000 -> fits, 0.5
        600000 -> exceeds, 50.0
    """
    if slot_ms <= 0:
        raise ValueError(f"slot_ms must be positive, got {slot_ms}")
    if isinstance(total, ExperimentAggregate):
        total_ms = total.total_duration_ms
    elif isinstance(total, SamplingResult):
        total_ms = max(total.set_durations_us.values(), default=0) / 1000
    elif isinstance(total, SeedingResult):
        total_ms = total.total_duration_us / 1000
    else:
        total_ms = float(total)
    ratio = total_ms / slot_ms
    verdict = BudgetVerdict.FITS if ratio <= 1.0 else BudgetVerdict.EXCEEDS
    return SlotBudget(verdict=verdict, ratio=ratio)


def seed_block_directly(block: DasBlock, net: Network, k: int,
                        keys: Optional[Iterable[SampleKey]] = None) -> int:
    """
    Place samples on their true k closest nodes without any network traffic.

    Args:
        block: Block the samples belong to
        net: Network whose stores are filled
        k: Replicas per sample
        keys: Subset of the block's samples to place (default: all of them)

    Returns:
        Number of replicas stored
    """
    stored = 0
    for key in (block.samples if keys is None else keys):
        payload = block.payload(key)
        for node in net.global_closest(key.bits, k):
            net.store(node, key.bits, payload)
            stored += 1
    return stored


def select_sampling_keys(spec: SamplingSpec, block: DasBlock, seed: int) -> List[List[SampleKey]]:
    """
    The samples each set will look up, drawn uniformly without replacement
    within a set. Deterministic in seed, so callers can seed exactly these
    samples before run_sampling.
    """
    rng = seeded_rng(seed, "sampling-keys")
    return [select_for_sampling(block, spec.queries_per_node, rng) for _ in range(spec.sets)]


def run_sampling(
    spec: SamplingSpec,
    block: DasBlock,
    net: Network,
    params: DhtParams,
    seed: int = 0,
    experiment_id: str = "",
    on_op_done: OpCallback = None
) -> SamplingResult:
    """
    Run spec.sets sampling sets one after another in virtual time.

    Each set launches all of its lookups at the same instant and ends when
    the last one finishes. Contact counters are reset before every set
    unless the network is configured to persist them.
    """
    client = DhtClient(net, params, seed=seed, experiment_id=experiment_id, on_op_done=on_op_done)
    key_sets = select_sampling_keys(spec, block, seed)
    origin_rng = seeded_rng(seed, "origins")
    fixed_origin = origin_rng.choice(net.ids)

    for set_id, keys in enumerate(key_sets):
        if not net.params.persist_load:
            net.reset_batch()
        set_origin = fixed_origin if spec.origin_policy is OriginPolicy.FIXED else origin_rng.choice(net.ids)
        for key in keys:
            origin = origin_rng.choice(net.ids) if spec.origin_policy is OriginPolicy.PER_LOOKUP else set_origin
            client.start_lookup(origin, key, find_value=spec.find_value, set_id=set_id)
        net.clock.run()

    records = client.records
    set_durations = set_durations_us(records)
    success_rate = sum(1 for r in records if r.success) / len(records)

    if spec.find_value and success_rate == 0.0:
        console.print("[yellow]No sample was found: the block does not appear to be seeded[/yellow]")
    return SamplingResult(records=records, set_durations_us=set_durations, success_rate=success_rate)


def run_seeding(
    spec: SeedingSpec,
    block: DasBlock,
    net: Network,
    params: DhtParams,
    seed: int = 0,
    experiment_id: str = "",
    on_op_done: OpCallback = None
) -> SeedingResult:
    """
    Seed the first spec.sample_count samples of the block through the DHT.

    Seeders are drawn from the population; samples are split across them
    round-robin and every provide is launched at the same virtual instant.

    Raises:
        ConfigError: if there are more seeders than nodes or more samples than the block holds
    """
    if spec.seeders > len(net):
        raise ConfigError("seeders", f"cannot exceed node_count ({len(net)}), got {spec.seeders}")
    if spec.sample_count > len(block):
        raise ConfigError("sample_count", f"cannot exceed the block's {len(block)} samples, got {spec.sample_count}")

    client = DhtClient(net, params, seed=seed, experiment_id=experiment_id, on_op_done=on_op_done)
    seeders = seeded_rng(seed, "seeders").sample(net.ids, spec.seeders)
    shares = assign_round_robin(select_for_seeding(block, spec.sample_count), spec.seeders)

    net.reset_batch()
    for seeder, share in zip(seeders, shares):
        for key in share:
            client.start_provide(seeder, key, block.payload(key))
    net.clock.run()

    records = client.records
    total_us = max(r.end_us for r in records) - min(r.start_us for r in records)
    replicas = Counter(len(r.stored_on) for r in records)

    # Load landing on the seeders' routing-table members during this batch.
    members = set(chain.from_iterable(net.table(s).entries() for s in seeders)) - set(seeders)
    incoming = net.load.incoming
    member_load = sum(incoming[node] for node in members)
    all_load = sum(incoming.values())
    others = len(net) - len(members)
    return SeedingResult(
        records=records,
        seeders=seeders,
        total_duration_us=total_us,
        stored_counts=net.stored_counts(),
        replica_distribution=dict(replicas),
        table_members=len(members),
        table_member_load_share=member_load / all_load if all_load else 0.0,
        table_member_mean_load=member_load / len(members) if members else 0.0,
        other_mean_load=(all_load - member_load) / others if others else 0.0,
    )


def build_aggregate(
    experiment: str,
    experiment_id: str,
    config: Dict[str, Any],
    records: List[OpRecord],
    net: Network,
    seeding: Optional[SeedingResult] = None,
    slot_ms: float = SLOT_MS
) -> ExperimentAggregate:
    """Summarise one run: record percentiles, slot ratio and contact load."""
    fields = record_metrics([r.to_row() for r in records], experiment)
    budget = slot_budget_check(fields["total_duration_ms"], slot_ms)
    lifetime = net.load.incoming_total
    return ExperimentAggregate(
        experiment_id=experiment_id,
        experiment=experiment,
        config=config,
        slot_ratio=budget.ratio,
        fits_slot=budget.fits,
        unseeded=experiment != "seeding" and bool(records) and fields["success_rate"] == 0.0,
        load_histogram=load_histogram(lifetime[node] for node in net.ids),
        seeding=seeding.summary() if seeding else {},
        **fields,
    )
