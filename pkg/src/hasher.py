"""Hasher module for deriving sample keys from their position in a block."""
import hashlib
from dataclasses import dataclass

BLOCK_ID_BYTES = 8
COORD_BYTES = 2


@dataclass(frozen=True)
class SampleKey:
    """A sample's identifier in the DHT keyspace plus the cell it came from."""
    bits: int
    block_id: int
    row: int
    col: int

    def __str__(self) -> str:
        return f"{self.block_id}:{self.row}:{self.col}"


def encode_origin(block_id: int, row: int, col: int) -> bytes:
    """
    Fixed-width big-endian encoding of a sample's origin.

    Examples:
        (1, 0, 2) -> 00 00 00 00 00 00 00 01 | 00 00 | 00 02

    Raises:
        ValueError: if any field is negative or does not fit its width
    """
    try:
        return (
            block_id.to_bytes(BLOCK_ID_BYTES, "big")
            + row.to_bytes(COORD_BYTES, "big")
            + col.to_bytes(COORD_BYTES, "big")
        )
    except OverflowError as e:
        raise ValueError(f"sample origin ({block_id}, {row}, {col}) out of range") from e


def hash_origin(block_id: int, row: int, col: int) -> int:
    """SHA-256 of the encoded origin, as a 256-bit integer."""
    digest = hashlib.sha256(encode_origin(block_id, row, col)).digest()
    return int.from_bytes(digest, "big")


def sample_key(block_id: int, row: int, col: int) -> SampleKey:
    """Build the key for the sample at (row, col) of a block."""
    return SampleKey(
        bits=hash_origin(block_id, row, col),
        block_id=block_id,
        row=row,
        col=col,
    )


def key_bits(key) -> int:
    """Accept either a SampleKey or a raw 256-bit int and return the raw bits."""
    if isinstance(key, SampleKey):
        return key.bits
    return int(key)
