"""Routing table module: k-buckets built from a static population."""
import random
from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum
from itertools import chain
from typing import Iterable, List, Optional, Sequence, Tuple

from errors import UnknownNodeError
from keyspace import ID_BITS, NodeId, bucket_index, shared_prefix_length

_EMPTY: Tuple[NodeId, ...] = ()


class BucketFill(Enum):
    """Which k members a bucket keeps when its prefix holds more than k nodes."""
    CLOSEST = "closest"   # the k closest to the owner
    RANDOM = "random"     # k drawn uniformly from the prefix


@dataclass(frozen=True)
class KBucket:
    """Read-only view of one bucket: entries ordered by distance to the owner."""
    index: int
    entries: Tuple[NodeId, ...]

    def __len__(self) -> int:
        return len(self.entries)


def closest_in_sorted(
    ids: Sequence[NodeId],
    lo: int,
    hi: int,
    target: int,
    depth: int,
    n: int
) -> List[NodeId]:
    """
    Return up to n ids from ids[lo:hi], closest to target first.

    `ids` must be sorted ascending and ids[lo:hi] must be a whole subtree of
    the binary trie, i.e. every id in it shares the same first `depth` bits.
    The subtree is split on the next bit; the half that agrees with target
    is strictly closer than the other, so only the near half is searched
    until it runs out.
    """
    if hi - lo <= n:
        return sorted(ids[lo:hi], key=lambda node: node ^ target)
    if depth >= ID_BITS:
        return [ids[lo]]

    shift = ID_BITS - 1 - depth
    prefix = (ids[lo] >> (shift + 1)) << (shift + 1)
    mid = bisect_left(ids, prefix | (1 << shift), lo, hi)

    if (target >> shift) & 1:
        near, far = (mid, hi), (lo, mid)
    else:
        near, far = (lo, mid), (mid, hi)

    result = closest_in_sorted(ids, near[0], near[1], target, depth + 1, n)
    if len(result) < n:
        result.extend(closest_in_sorted(ids, far[0], far[1], target, depth + 1, n - len(result)))
    return result


class RoutingTable:
    """
    256 k-buckets of node references, indexed by shared-prefix length.

    Tables are built once from global knowledge of the population and never
    mutated afterwards, so they can be read from any number of threads.
    """

    def __init__(self, local_id: NodeId, buckets: List[Tuple[NodeId, ...]], k: int):
        self.local_id = local_id
        self.k = k
        self._buckets = buckets
        self._deepest = max((i for i, b in enumerate(buckets) if b), default=-1)

    @classmethod
    def build(cls, local: NodeId, sorted_ids: Sequence[NodeId], k: int,
              fill: BucketFill = BucketFill.CLOSEST, rng: Optional[random.Random] = None) -> "RoutingTable":
        """
        Build a table from an already sorted, duplicate-free population.

        Bucket i receives the up-to-k members whose shared prefix with local
        is exactly i bits. A prefix with more than k members contributes the
        k closest to local, or k drawn with rng under BucketFill.RANDOM.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if fill is BucketFill.RANDOM and rng is None:
            raise ValueError("random bucket fill needs an rng")
        pos = bisect_left(sorted_ids, local)
        if pos == len(sorted_ids) or sorted_ids[pos] != local:
            raise UnknownNodeError(local)

        buckets: List[Tuple[NodeId, ...]] = [_EMPTY] * ID_BITS
        for i in range(ID_BITS):
            shift = ID_BITS - 1 - i
            # Subtree holding local at depth i+1; once it is just local, all
            # deeper buckets are empty.
            own = local >> shift
            own_lo = bisect_left(sorted_ids, own << shift)
            own_hi = bisect_left(sorted_ids, (own + 1) << shift)

            sibling = own ^ 1
            lo = bisect_left(sorted_ids, sibling << shift)
            hi = bisect_left(sorted_ids, (sibling + 1) << shift)
            if hi - lo > k and fill is BucketFill.RANDOM:
                picked = (sorted_ids[j] for j in rng.sample(range(lo, hi), k))
                buckets[i] = tuple(sorted(picked, key=lambda node: node ^ local))
            elif hi > lo:
                buckets[i] = tuple(closest_in_sorted(sorted_ids, lo, hi, local, i + 1, k))

            if own_hi - own_lo <= 1:
                break
        return cls(local, buckets, k)

    def bucket(self, index: int) -> KBucket:
        return KBucket(index=index, entries=self._buckets[index])

    @property
    def buckets(self) -> List[KBucket]:
        return [KBucket(index=i, entries=entries) for i, entries in enumerate(self._buckets)]

    def entries(self) -> List[NodeId]:
        """All entries, bucket by bucket."""
        return list(chain.from_iterable(self._buckets))

    def __len__(self) -> int:
        return sum(len(b) for b in self._buckets)

    def __contains__(self, node: NodeId) -> bool:
        if node == self.local_id:
            return False
        return node in self._buckets[shared_prefix_length(node, self.local_id)]

    def closest(self, key: int, n: int) -> List[NodeId]:
        """
        Return the n entries closest to key, nearest first.

        Walks buckets in distance order instead of sorting the whole table:
        the bucket matching key's prefix comes first, then every deeper
        bucket together, then the shallower buckets one by one from the
        deepest down to bucket 0.
        """
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")

        def by_distance(nodes: Iterable[NodeId]) -> List[NodeId]:
            return sorted(nodes, key=lambda node: node ^ key)

        if key == self.local_id:
            start = ID_BITS
            result: List[NodeId] = []
        else:
            start = bucket_index(key ^ self.local_id)
            result = by_distance(self._buckets[start])
            if len(result) >= n:
                return result[:n]
            if start < self._deepest:
                result.extend(by_distance(chain.from_iterable(self._buckets[start + 1:self._deepest + 1])))
                if len(result) >= n:
                    return result[:n]

        # When key == local_id every bucket is "shallower", deepest nearest.
        for i in range(min(start, self._deepest + 1) - 1, -1, -1):
            result.extend(by_distance(self._buckets[i]))
            if len(result) >= n:
                return result[:n]
        return result


def table_init(local: NodeId, population: Iterable[NodeId], k: int,
               fill: BucketFill = BucketFill.CLOSEST, rng: Optional[random.Random] = None) -> RoutingTable:
    """
    Build the routing table of `local` from the full population.

    Args:
        local: Owner of the table; must be a member of population
        population: Every node id in the network (duplicates are ignored)
        k: Bucket capacity
        fill: How oversized prefixes are cut down to k
        rng: Source of the draws for BucketFill.RANDOM

    Returns:
        The table for (local, population, k); deterministic given the rng state

    Raises:
        ValueError: if population is empty, k < 1, or a random fill has no rng
        UnknownNodeError: if local is not in population
    """
    sorted_ids = sorted(set(population))
    if not sorted_ids:
        raise ValueError("population is empty")
    return RoutingTable.build(local, sorted_ids, k, fill, rng)
