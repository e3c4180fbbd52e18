"""Block module: the extended DAS block grid and its samples."""
import hashlib
import random
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

from hasher import SampleKey, encode_origin, sample_key

DEFAULT_ROWS = 512
DEFAULT_COLS = 512
SAMPLE_DATA_BYTES = 512
PROOF_BYTES = 48
SAMPLE_BYTES = SAMPLE_DATA_BYTES + PROOF_BYTES
MAX_DIMENSION = 1 << 16


@dataclass
class DasBlock:
    """
    A rows x cols grid of samples, each with a 560-byte payload.

    Keys are kept in row-major order. Payloads are derived on demand from a
    per-block secret drawn at build time, so a full-size block costs only
    its keys in memory; the same (block, row, col) always yields the same
    bytes.
    """
    block_id: int
    rows: int
    cols: int
    samples: List[SampleKey]
    payload_secret: bytes = field(repr=False)
    _index: Dict[int, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self._index = {key.bits: i for i, key in enumerate(self.samples)}

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[SampleKey]:
        return iter(self.samples)

    def sample(self, row: int, col: int) -> SampleKey:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise IndexError(f"cell ({row}, {col}) outside a {self.rows}x{self.cols} block")
        return self.samples[row * self.cols + col]

    def position(self, key: SampleKey) -> Tuple[int, int]:
        """(row, col) of a sample of this block."""
        index = self._index[key.bits]
        return divmod(index, self.cols)

    def payload(self, key: SampleKey) -> bytes:
        """Data plus proof bytes of one sample."""
        if key.bits not in self._index:
            raise KeyError(f"sample {key} is not part of block {self.block_id}")
        origin = encode_origin(key.block_id, key.row, key.col)
        return hashlib.shake_256(self.payload_secret + origin).digest(SAMPLE_BYTES)


def build_block(block_id: int, rng: random.Random, rows: int = DEFAULT_ROWS,
                cols: int = DEFAULT_COLS) -> DasBlock:
    """
    Build the sample grid of a block.

    Args:
        block_id: Identifier mixed into every sample key
        rng: Source of the payload secret
        rows: Number of rows in the extended grid
        cols: Number of columns in the extended grid

    Returns:
        DasBlock with rows * cols keyed samples in row-major order

    Raises:
        ValueError: if a dimension is outside [1, 65536]
    """
    for name, value in (("rows", rows), ("cols", cols)):
        if not 1 <= value <= MAX_DIMENSION:
            raise ValueError(f"{name} must be in [1, {MAX_DIMENSION}], got {value}")

    samples = [sample_key(block_id, row, col) for row in range(rows) for col in range(cols)]
    secret = rng.getrandbits(128).to_bytes(16, "big")
    return DasBlock(block_id=block_id, rows=rows, cols=cols, samples=samples, payload_secret=secret)
