"""Organizer module for choosing and distributing block samples."""
import random
from typing import List, Sequence

from block import DasBlock
from hasher import SampleKey


def select_for_seeding(block: DasBlock, sample_count: int) -> List[SampleKey]:
    """
    The first sample_count samples of the block in row-major order.

    Raises:
        ValueError: if sample_count is not in [1, len(block)]
    """
    if not 1 <= sample_count <= len(block):
        raise ValueError(f"sample_count must be in [1, {len(block)}], got {sample_count}")
    return block.samples[:sample_count]


def assign_round_robin(samples: Sequence[SampleKey], seeders: int) -> List[List[SampleKey]]:
    """
    Partition samples across seeders: sample i goes to seeder i mod seeders.

    Every sample lands in exactly one share; shares keep the input order.
    Example: 5 samples, 2 seeders -> [[s0, s2, s4], [s1, s3]]
    """
    if seeders < 1:
        raise ValueError(f"seeders must be >= 1, got {seeders}")
    return [list(samples[i::seeders]) for i in range(seeders)]


def select_for_sampling(block: DasBlock, count: int, rng: random.Random) -> List[SampleKey]:
    """Draw count distinct samples uniformly at random."""
    if not 1 <= count <= len(block):
        raise ValueError(f"queries_per_node must be in [1, {len(block)}], got {count}")
    return [block.samples[i] for i in rng.sample(range(len(block)), count)]
