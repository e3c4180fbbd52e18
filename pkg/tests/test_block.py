import random
from collections import Counter

import pytest

from block import SAMPLE_BYTES, DasBlock, build_block
from hasher import encode_origin, hash_origin, key_bits, sample_key


def test_encode_origin_layout():
    assert encode_origin(1, 0, 2) == bytes([0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 2])


def test_encode_origin_rejects_out_of_range():
    with pytest.raises(ValueError):
        encode_origin(1, 1 << 16, 0)
    with pytest.raises(ValueError):
        encode_origin(-1, 0, 0)


def test_sample_key_is_deterministic():
    key = sample_key(3, 4, 5)
    assert key == sample_key(3, 4, 5)
    assert key.bits == hash_origin(3, 4, 5)
    assert key_bits(key) == key.bits
    assert key_bits(key.bits) == key.bits
    assert str(key) == "3:4:5"


def test_small_block_has_distinct_keys():
    block = build_block(1, random.Random(1), rows=2, cols=2)
    assert len(block) == 4
    assert len({key.bits for key in block}) == 4
    assert block.sample(1, 0) == sample_key(1, 1, 0)
    assert block.position(block.sample(1, 1)) == (1, 1)


def test_payloads_are_fixed_size_and_reproducible():
    block = build_block(1, random.Random(1), rows=4, cols=4)
    again = build_block(1, random.Random(1), rows=4, cols=4)
    other = build_block(1, random.Random(2), rows=4, cols=4)
    key = block.sample(2, 3)
    assert len(block.payload(key)) == SAMPLE_BYTES == 560
    assert block.payload(key) == again.payload(key)
    assert block.payload(key) != other.payload(key)
    assert block.payload(key) != block.payload(block.sample(0, 0))


def test_payload_of_foreign_sample_raises():
    block = build_block(1, random.Random(1), rows=2, cols=2)
    with pytest.raises(KeyError):
        block.payload(sample_key(2, 0, 0))


def test_invalid_dimensions():
    with pytest.raises(ValueError):
        build_block(1, random.Random(1), rows=0, cols=4)
    with pytest.raises(IndexError):
        build_block(1, random.Random(1), rows=2, cols=2).sample(2, 0)


def test_default_block_keys_are_uniform():
    block = build_block(7, random.Random(3))
    assert isinstance(block, DasBlock)
    assert len(block) == 512 * 512
    buckets = Counter(key.bits >> 248 for key in block)
    assert len(buckets) == 256
    # 262,144 keys over 256 buckets: mean 1024, sigma about 32
    assert all(abs(count - 1024) <= 5 * 32 for count in buckets.values())
