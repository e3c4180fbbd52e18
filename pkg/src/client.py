"""Client module: iterative Kademlia lookups and provides over the network model."""
from bisect import insort
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Callable, Deque, Dict, List, Optional, Set, Tuple, Union

from draws import DrawStream
from errors import ConfigError, UnknownNodeError
from hasher import SampleKey, key_bits
from keyspace import NodeId, format_id
from metrics import RecordRow
from network import ConnectionOutcome, Network, OutcomeKind

MAX_BETA = 256

Key = Union[SampleKey, int]


class OpType(Enum):
    LOOKUP_VALUE = "lookup_value"
    LOOKUP_NODES = "lookup_nodes"
    PROVIDE = "provide"


class StopRule(Enum):
    """When an iterative lookup stops asking for closer nodes."""
    CLOSEST_QUERIED = "closest-queried"
    STALLED = "stalled"                   # stall_limit responses in a row left the top k unchanged


@dataclass(frozen=True)
class DhtParams:
    k: int = 20
    alpha: int = 3
    beta: int = 20
    stop_rule: StopRule = StopRule.CLOSEST_QUERIED
    stall_limit: int = 3

    def __post_init__(self):
        for name in ("k", "alpha", "beta", "stall_limit"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if self.beta > MAX_BETA:
            raise ConfigError("beta", f"must be <= {MAX_BETA}, got {self.beta}")


@dataclass
class OpRecord:
    """Trace of one operation; times are virtual microseconds."""
    op_id: int
    op_type: OpType
    key: Key
    origin: NodeId
    start_us: int
    end_us: int = -1
    hops: int = 0
    contacted: int = 0
    failed_fast: int = 0
    failed_slow: int = 0
    success: bool = False
    stored_on: List[NodeId] = field(default_factory=list)
    set_id: int = 0
    experiment_id: str = ""

    @property
    def duration_us(self) -> int:
        return self.end_us - self.start_us

    @property
    def finished(self) -> bool:
        return self.end_us >= 0

    def to_row(self) -> RecordRow:
        return RecordRow(
            experiment_id=self.experiment_id,
            set_id=self.set_id,
            op_id=self.op_id,
            op_type=self.op_type.value,
            key_hex=format_id(key_bits(self.key)),
            origin_hex=format_id(self.origin),
            hops=self.hops,
            contacted=self.contacted,
            failed_fast=self.failed_fast,
            failed_slow=self.failed_slow,
            start_us=self.start_us,
            end_us=self.end_us,
            success=self.success,
            replicas=len(self.stored_on) if self.op_type is OpType.PROVIDE else None,
        )


@dataclass
class _Query:
    node: NodeId
    outcome: ConnectionOutcome
    due_us: int


_UNQUERIED = 0
_PENDING = 1
_RESPONDED = 2


class Lookup:
    """
    Iterative alpha-parallel lookup for the nodes closest to a key, or for
    the key's value.

    At most `alpha` queries are in flight. Responses are consumed in the
    order their queries were dispatched; each consumed response (success or
    failure) is one hop and frees a slot that is refilled at once with the
    closest unqueried candidate. Failed nodes are dropped and never asked
    again.
    """

    def __init__(
        self,
        net: Network,
        origin: NodeId,
        key: Key,
        params: DhtParams,
        record: OpRecord,
        draws: DrawStream,
        find_value: bool,
        on_done: Callable[["Lookup"], None]
    ):
        self.net = net
        self.origin = origin
        self.target = key_bits(key)
        self.params = params
        self.record = record
        self.draws = draws
        self.find_value = find_value
        self.on_done = on_done

        self._shortlist: List[NodeId] = []
        self._state: Dict[NodeId, int] = {}
        self._queried: Set[NodeId] = set()
        self._pending: Deque[_Query] = deque()
        self._capacity = params.k + params.beta
        self._unchanged = 0

        self.finished = False
        self.best_k: List[NodeId] = []
        self.closest_known: List[NodeId] = []
        self.value: Optional[bytes] = None

    def _distance(self, node: NodeId) -> int:
        return node ^ self.target

    def start(self) -> None:
        self.record.start_us = self.net.clock.now_us
        if self.find_value:
            local = self.net.get_value(self.origin, self.target)
            if local is not None:
                self.value = local
                self._finish()
                return
        self._merge(self.net.table(self.origin).closest(self.target, self.params.beta))
        self._fill()
        if not self._pending:
            self._finish()

    def _merge(self, nodes: List[NodeId]) -> bool:
        """Add newly learned nodes; True if the k closest candidates changed."""
        k = self.params.k
        before = self._shortlist[:k]
        for node in nodes:
            if node == self.origin or node in self._queried or node in self._state:
                continue
            insort(self._shortlist, node, key=self._distance)
            self._state[node] = _UNQUERIED
        if len(self._shortlist) > self._capacity:
            for dropped in self._shortlist[self._capacity:]:
                del self._state[dropped]
            del self._shortlist[self._capacity:]
        return self._shortlist[:k] != before

    def _drop(self, node: NodeId) -> None:
        if self._state.pop(node, None) is not None:
            self._shortlist.remove(node)

    def _next_candidate(self) -> Optional[NodeId]:
        for node in self._shortlist:
            if self._state[node] == _UNQUERIED:
                return node
        return None

    def _fill(self) -> None:
        while len(self._pending) < self.params.alpha:
            node = self._next_candidate()
            if node is None:
                return
            self._dispatch(node)

    def _dispatch(self, node: NodeId) -> None:
        self._state[node] = _PENDING
        self._queried.add(node)
        outcome = self.net.connect(self.origin, node, self.draws)
        query = _Query(node=node, outcome=outcome, due_us=self.net.clock.now_us + outcome.delay_us)
        self._pending.append(query)
        if len(self._pending) == 1:
            self.net.clock.schedule(query.due_us, self._consume_head)

    def _settled(self) -> bool:
        head = self._shortlist[:self.params.k]
        if not head or any(self._state[node] != _RESPONDED for node in head):
            return False
        return True

    def _consume_head(self) -> None:
        if self.finished:
            return
        query = self._pending.popleft()
        record = self.record
        record.hops += 1
        record.contacted += 1

        kind = query.outcome.kind
        if kind is OutcomeKind.FAST_ERROR:
            record.failed_fast += 1
            self._drop(query.node)
        elif kind is OutcomeKind.SLOW_ERROR:
            record.failed_slow += 1
            self._drop(query.node)
        else:
            if query.node in self._state:
                self._state[query.node] = _RESPONDED
            if self.find_value:
                value = self.net.get_value(query.node, self.target)
                if value is not None:
                    self.value = value
                    self._finish()
                    return
            responder = self.net.table(query.node)
            if self._merge(responder.closest(self.target, self.params.beta)):
                self._unchanged = 0
            else:
                self._unchanged += 1

        if self._settled():
            self._finish()
            return
        if self.params.stop_rule is StopRule.STALLED and self._unchanged >= self.params.stall_limit:
            self._finish()
            return

        now = self.net.clock.now_us
        if self._pending:
            self.net.clock.schedule(max(self._pending[0].due_us, now), self._consume_head)
        self._fill()
        if not self._pending:
            self._finish()

    def _finish(self) -> None:
        self.finished = True
        k = self.params.k
        self.best_k = [node for node in self._shortlist if self._state[node] == _RESPONDED][:k]
        self.closest_known = self._shortlist[:k]
        self.record.end_us = self.net.clock.now_us
        if self.find_value:
            self.record.success = self.value is not None
        else:
            self.record.success = bool(self.best_k)
        self.on_done(self)


class Provide:
    """
    Lookup of the k closest nodes to a key followed by one store connection
    to each of them, all issued at once. Acknowledged stores land in the
    node's value map when they complete.

    The stores go to the k closest candidates that have not failed. A lookup
    that settles has queried all of them; a stalled one may not have.
    """

    def __init__(
        self,
        net: Network,
        origin: NodeId,
        key: Key,
        value: bytes,
        params: DhtParams,
        record: OpRecord,
        draws: DrawStream,
        on_done: Callable[["Provide"], None]
    ):
        self.net = net
        self.origin = origin
        self.key = key
        self.value = value
        self.params = params
        self.record = record
        self.draws = draws
        self.on_done = on_done
        self.finished = False
        self._outstanding = 0
        self.lookup = Lookup(net, origin, key, params, record, draws, False, self._on_lookup_done)

    def start(self) -> None:
        self.lookup.start()

    def _on_lookup_done(self, lookup: Lookup) -> None:
        targets = lookup.closest_known
        if not targets:
            self._finish()
            return
        now = self.net.clock.now_us
        self._outstanding = len(targets)
        for node in targets:
            outcome = self.net.connect(self.origin, node, self.draws)
            self.net.clock.schedule(now + outcome.delay_us, partial(self._on_store, node, outcome))

    def _on_store(self, node: NodeId, outcome: ConnectionOutcome) -> None:
        if outcome.ok:
            self.net.store(node, key_bits(self.key), self.value)
            self.record.stored_on.append(node)
        self._outstanding -= 1
        if self._outstanding == 0:
            self._finish()

    def _finish(self) -> None:
        self.finished = True
        self.record.end_us = self.net.clock.now_us
        self.record.success = bool(self.record.stored_on)
        self.on_done(self)


class DhtClient:
    """
    Launches lookups and provides on a network and keeps their records.

    Every operation gets the next op id and its own draw stream keyed by
    (seed, op id), so its connection outcomes do not depend on what else is
    running.
    """

    def __init__(self, net: Network, params: DhtParams, seed: int = 0, experiment_id: str = "",
                 on_op_done: Optional[Callable[[OpRecord], None]] = None):
        self.net = net
        self.params = params
        self.seed = seed
        self.experiment_id = experiment_id
        self.on_op_done = on_op_done
        self.records: List[OpRecord] = []
        self._next_op_id = 0

    def _new_record(self, op_type: OpType, origin: NodeId, key: Key, set_id: int) -> Tuple[OpRecord, DrawStream]:
        if origin not in self.net:
            raise UnknownNodeError(origin)
        op_id = self._next_op_id
        self._next_op_id += 1
        record = OpRecord(
            op_id=op_id,
            op_type=op_type,
            key=key,
            origin=origin,
            start_us=self.net.clock.now_us,
            set_id=set_id,
            experiment_id=self.experiment_id,
        )
        self.records.append(record)
        return record, DrawStream(self.seed, op_id)

    def _done(self, op, callback) -> None:
        if self.on_op_done:
            self.on_op_done(op.record)
        if callback:
            callback(op)

    def start_lookup(self, origin: NodeId, key: Key, find_value: bool, set_id: int = 0,
                     on_done: Optional[Callable[[Lookup], None]] = None) -> Lookup:
        op_type = OpType.LOOKUP_VALUE if find_value else OpType.LOOKUP_NODES
        record, draws = self._new_record(op_type, origin, key, set_id)
        lookup = Lookup(self.net, origin, key, self.params, record, draws, find_value,
                        partial(self._done, callback=on_done))
        lookup.start()
        return lookup

    def start_provide(self, origin: NodeId, key: Key, value: bytes, set_id: int = 0,
                      on_done: Optional[Callable[[Provide], None]] = None) -> Provide:
        record, draws = self._new_record(OpType.PROVIDE, origin, key, set_id)
        provide = Provide(self.net, origin, key, value, self.params, record, draws,
                          partial(self._done, callback=on_done))
        provide.start()
        return provide

    def lookup_nodes(self, origin: NodeId, target: Key) -> Tuple[List[NodeId], OpRecord]:
        lookup = self.start_lookup(origin, target, find_value=False)
        self.net.clock.run()
        return lookup.best_k, lookup.record

    def lookup_value(self, origin: NodeId, key: Key) -> Tuple[Optional[bytes], OpRecord]:
        lookup = self.start_lookup(origin, key, find_value=True)
        self.net.clock.run()
        return lookup.value, lookup.record

    def provide(self, origin: NodeId, key: Key, value: bytes) -> Tuple[List[NodeId], OpRecord]:
        provide = self.start_provide(origin, key, value)
        self.net.clock.run()
        return list(provide.record.stored_on), provide.record


def lookup_nodes(origin: NodeId, target: Key, params: DhtParams, net: Network,
                 seed: int = 0) -> Tuple[List[NodeId], OpRecord]:
    """
    Find the k closest responsive nodes to target, starting from origin.

    Runs the network's clock until the lookup (and anything else already
    scheduled) completes.

    Raises:
        UnknownNodeError: if origin is not in the network
    """
    return DhtClient(net, params, seed).lookup_nodes(origin, target)


def lookup_value(origin: NodeId, key: Key, params: DhtParams, net: Network,
                 seed: int = 0) -> Tuple[Optional[bytes], OpRecord]:
    """Retrieve key's value, or None with record.success False when no queried node holds it."""
    return DhtClient(net, params, seed).lookup_value(origin, key)


def provide(origin: NodeId, key: Key, value: bytes, params: DhtParams, net: Network,
            seed: int = 0) -> Tuple[List[NodeId], OpRecord]:
    """Store value on the k closest nodes found by a lookup; returns the acknowledging nodes."""
    return DhtClient(net, params, seed).provide(origin, key, value)
