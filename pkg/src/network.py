"""Network module: connection outcomes, delays and per-node contact load."""
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from clock import VirtualClock
from draws import seeded_rng
from errors import ConfigError, SelfConnectionError, UnknownNodeError
from keyspace import NodeId, format_id, generate_node_ids
from routing_table import BucketFill, RoutingTable, closest_in_sorted

DelayRange = Tuple[float, float]


class OutcomeKind(Enum):
    SUCCESS = "success"
    FAST_ERROR = "fast_error"
    SLOW_ERROR = "slow_error"


class GammaScope(Enum):
    """Which contact counters feed the concurrency overhead."""
    CALLEE = "callee"   # destination's incoming attempts
    CALLER = "caller"   # source's outgoing attempts
    BOTH = "both"


def ms_to_us(value_ms: float) -> int:
    return round(value_ms * 1000)


@dataclass(frozen=True)
class NetworkParams:
    """Error rates, delay ranges (milliseconds), the overhead gamma and how tables are filled."""
    node_count: int = 12000
    fast_error_rate: float = 0.10
    slow_error_rate: float = 0.0
    conn_delay_range: DelayRange = (50.0, 300.0)
    fast_delay_range: DelayRange = (5.0, 50.0)
    slow_delay_range: DelayRange = (2000.0, 5000.0)
    gamma_ms: float = 0.0
    gamma_scope: GammaScope = GammaScope.CALLEE
    persist_load: bool = False
    bucket_fill: BucketFill = BucketFill.CLOSEST

    # Integer forms used on the hot path.
    _ranges_us: Dict[OutcomeKind, Tuple[int, int]] = field(init=False, repr=False, compare=False)
    _gamma_ns: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.validate()
        object.__setattr__(self, "_ranges_us", {
            OutcomeKind.SUCCESS: tuple(ms_to_us(v) for v in self.conn_delay_range),
            OutcomeKind.FAST_ERROR: tuple(ms_to_us(v) for v in self.fast_delay_range),
            OutcomeKind.SLOW_ERROR: tuple(ms_to_us(v) for v in self.slow_delay_range),
        })
        object.__setattr__(self, "_gamma_ns", round(self.gamma_ms * 1_000_000))

    def validate(self) -> None:
        """
        Raises:
            ConfigError: naming the first offending parameter
        """
        if self.node_count < 2:
            raise ConfigError("node_count", f"need at least 2 nodes, got {self.node_count}")
        for name in ("fast_error_rate", "slow_error_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ConfigError(name, f"must be a probability in [0, 1], got {rate}")
        if self.fast_error_rate + self.slow_error_rate > 1.0:
            raise ConfigError(
                "slow_error_rate",
                f"fast_error_rate + slow_error_rate must be <= 1, got "
                f"{self.fast_error_rate + self.slow_error_rate}"
            )
        for name in ("conn_delay_range", "fast_delay_range", "slow_delay_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ConfigError(name, f"range must satisfy 0 <= min <= max, got {lo}:{hi}")
        if self.gamma_ms < 0:
            raise ConfigError("gamma_ms", f"must be non-negative, got {self.gamma_ms}")

    def range_us(self, kind: OutcomeKind) -> Tuple[int, int]:
        return self._ranges_us[kind]

    def overhead_us(self, contacts: int) -> int:
        """Overhead for a connection that finds `contacts` earlier ones."""
        return (self._gamma_ns * contacts) // 1000


@dataclass(frozen=True)
class ConnectionOutcome:
    kind: OutcomeKind
    delay_us: int
    overhead_us: int = 0

    @property
    def delay_ms(self) -> float:
        return self.delay_us / 1000

    @property
    def ok(self) -> bool:
        return self.kind is OutcomeKind.SUCCESS


class ContactLoad:
    """
    Contact counters for the current batch plus lifetime totals.

    `incoming[n]` counts connection attempts targeting n, `outgoing[n]`
    counts attempts n made; failed attempts count too.
    """

    def __init__(self):
        self.incoming: Counter = Counter()
        self.outgoing: Counter = Counter()
        self.incoming_total: Counter = Counter()
        self.outgoing_total: Counter = Counter()

    def __getitem__(self, node: NodeId) -> int:
        return self.incoming[node]

    def contacts_before(self, src: NodeId, dst: NodeId, scope: GammaScope) -> int:
        if scope is GammaScope.CALLEE:
            return self.incoming[dst]
        if scope is GammaScope.CALLER:
            return self.outgoing[src]
        return self.incoming[dst] + self.outgoing[src]

    def record(self, src: NodeId, dst: NodeId) -> None:
        self.incoming[dst] += 1
        self.outgoing[src] += 1
        self.incoming_total[dst] += 1
        self.outgoing_total[src] += 1

    def reset_batch(self) -> None:
        """Zero the batch counters; lifetime totals are kept."""
        self.incoming.clear()
        self.outgoing.clear()


def reset_batch(load: ContactLoad) -> None:
    load.reset_batch()


def connect(src: NodeId, dst: NodeId, rng, load: ContactLoad, params: NetworkParams) -> ConnectionOutcome:
    """
    Simulate one connection attempt from src to dst.

    Draws u ~ U[0,1) to pick the outcome (fast error, slow error, success in
    that order of the unit interval), then a uniform base delay from that
    outcome's range. The overhead is gamma times the contact count seen
    before this attempt; the attempt is then counted.

    Args:
        src: Connecting node
        dst: Contacted node
        rng: Anything with random() and randint(a, b)
        load: Contact counters, updated in place
        params: Network parameters

    Raises:
        SelfConnectionError: if src == dst
    """
    if src == dst:
        raise SelfConnectionError(src)

    u = rng.random()
    if u < params.fast_error_rate:
        kind = OutcomeKind.FAST_ERROR
    elif u < params.fast_error_rate + params.slow_error_rate:
        kind = OutcomeKind.SLOW_ERROR
    else:
        kind = OutcomeKind.SUCCESS

    lo, hi = params.range_us(kind)
    base = rng.randint(lo, hi)
    overhead = params.overhead_us(load.contacts_before(src, dst, params.gamma_scope))
    load.record(src, dst)
    return ConnectionOutcome(kind=kind, delay_us=base + overhead, overhead_us=overhead)


class Network:
    """
    Shared view of the simulated network: population, routing tables,
    stored values, contact load and the virtual clock.
    """

    def __init__(self, params: NetworkParams, ids: List[NodeId], k: int,
                 on_table_built: Optional[Callable[[int], None]] = None, table_seed: int = 0):
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        self.params = params
        self.k = k
        self.ids = list(ids)
        self.sorted_ids = sorted(ids)
        self.tables: Dict[NodeId, RoutingTable] = {}
        for i, node in enumerate(self.ids):
            rng = None
            if params.bucket_fill is BucketFill.RANDOM:
                rng = seeded_rng(table_seed, f"table/{format_id(node)}")
            self.tables[node] = RoutingTable.build(node, self.sorted_ids, k, params.bucket_fill, rng)
            if on_table_built:
                on_table_built(i + 1)
        self.stores: Dict[NodeId, Dict[int, bytes]] = {}
        self.load = ContactLoad()
        self.clock = VirtualClock()

    @classmethod
    def build(cls, params: NetworkParams, k: int, seed: int,
              on_table_built: Optional[Callable[[int], None]] = None) -> "Network":
        """Draw params.node_count ids from the run seed and build every table."""
        ids = generate_node_ids(params.node_count, seeded_rng(seed, "node-ids"))
        return cls(params, ids, k, on_table_built, table_seed=seed)

    def __contains__(self, node: NodeId) -> bool:
        return node in self.tables

    def __len__(self) -> int:
        return len(self.ids)

    def table(self, node: NodeId) -> RoutingTable:
        try:
            return self.tables[node]
        except KeyError:
            raise UnknownNodeError(node) from None

    def connect(self, src: NodeId, dst: NodeId, rng) -> ConnectionOutcome:
        if dst not in self.tables:
            raise UnknownNodeError(dst)
        return connect(src, dst, rng, self.load, self.params)

    def reset_batch(self) -> None:
        self.load.reset_batch()

    # === Value storage ===

    def store(self, node: NodeId, key: int, value: bytes) -> None:
        self.stores.setdefault(node, {})[key] = value

    def get_value(self, node: NodeId, key: int) -> Optional[bytes]:
        node_store = self.stores.get(node)
        if node_store is None:
            return None
        return node_store.get(key)

    def stored_counts(self) -> Dict[NodeId, int]:
        """Number of stored keys per node, zero for nodes holding nothing."""
        return {node: len(self.stores.get(node, ())) for node in self.ids}

    # === Global knowledge ===

    def global_closest(self, key: int, n: int, exclude: Optional[NodeId] = None) -> List[NodeId]:
        """The n population members closest to key, optionally skipping one."""
        want = n + 1 if exclude is not None else n
        found = closest_in_sorted(self.sorted_ids, 0, len(self.sorted_ids), key, 0, want)
        return [node for node in found if node != exclude][:n]
