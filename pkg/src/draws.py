"""Deterministic random sources for reproducible simulations.

Two kinds of randomness are used:

- `seeded_rng(seed, label)`: an ordinary `random.Random` for setup work
  (node ids, payloads, sample and origin selection), one per purpose so
  that changing how much one purpose consumes never shifts another.
- `DrawStream(seed, stream)`: a counter-based stream for connection
  outcomes. Draw n of a stream depends only on (seed, stream, n), so an
  operation sees the same draws however concurrent operations interleave.
"""
import hashlib
import random

_SCALE = 1.0 / (1 << 64)


def _derive(seed: int, label: str) -> bytes:
    return hashlib.sha256(f"{seed}/{label}".encode("utf-8")).digest()


def seeded_rng(seed: int, label: str) -> random.Random:
    """Independent `random.Random` for one purpose of one run."""
    return random.Random(int.from_bytes(_derive(seed, label), "big"))


class DrawStream:
    """Counter-based uniform draws keyed by (seed, stream)."""

    __slots__ = ("_prefix", "_counter")

    def __init__(self, seed: int, stream: int | str):
        self._prefix = _derive(seed, f"stream/{stream}")[:16]
        self._counter = 0

    @property
    def consumed(self) -> int:
        return self._counter

    def _next64(self) -> int:
        digest = hashlib.blake2b(
            self._counter.to_bytes(8, "big"),
            digest_size=8,
            key=self._prefix
        ).digest()
        self._counter += 1
        return int.from_bytes(digest, "big")

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return self._next64() * _SCALE

    def randint(self, a: int, b: int) -> int:
        """Uniform integer in [a, b], inclusive."""
        if b < a:
            raise ValueError(f"empty range [{a}, {b}]")
        return a + (self._next64() * (b - a + 1) >> 64)
