"""Keyspace module: 256-bit identifiers and the XOR metric."""
import random
from typing import List, Set

from errors import SelfReferenceError

ID_BITS = 256
ID_MAX = (1 << ID_BITS) - 1

# Node ids and keys are plain ints in [0, 2^256); the alias documents intent.
NodeId = int


def xor_distance(a: int, b: int) -> int:
    """Return the XOR distance between two identifiers."""
    return a ^ b


def bucket_index(distance: int) -> int:
    """
    Map a non-zero distance to its k-bucket index.

    The index is the length of the prefix shared by the two identifiers:
    0 when the most significant bit differs, 255 when only the last bit does.

    Raises:
        SelfReferenceError: if distance is zero
    """
    if distance == 0:
        raise SelfReferenceError()
    return ID_BITS - distance.bit_length()


def shared_prefix_length(a: int, b: int) -> int:
    """Number of leading bits two identifiers have in common (256 if equal)."""
    if a == b:
        return ID_BITS
    return bucket_index(a ^ b)


def generate_node_ids(count: int, rng: random.Random) -> List[NodeId]:
    """
    Draw `count` distinct node ids uniformly from the keyspace.

    Collisions are rejected and redrawn, so the result always has exactly
    `count` unique ids, in draw order.
    """
    ids: List[NodeId] = []
    seen: Set[NodeId] = set()
    while len(ids) < count:
        candidate = rng.getrandbits(ID_BITS)
        if candidate in seen:
            continue
        seen.add(candidate)
        ids.append(candidate)
    return ids


def format_id(value: int) -> str:
    """Render an identifier as 64 lowercase hex digits."""
    return f"{value:064x}"
