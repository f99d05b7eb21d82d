"""Counter-based random streams.

A :class:`RngStream` is a value ``(seed, stream_id)``; the generator it
yields is a Philox counter-based generator keyed by that pair, so the draw
sequence depends only on the pair — never on scheduling, thread count or
how many other streams were consumed first.  Calling :meth:`generator`
twice gives two generators that replay the same sequence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix(a: int, b: int) -> int:
    # splitmix64-style finalizer over the combined words
    z = (a * 0x9E3779B97F4A7C15 + b) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngStream":
        """A derived stream; distinct indices give independent streams."""
        return RngStream(self.seed, _mix(self.stream_id, int(index) + 1))


def as_generator(rng) -> np.random.Generator:
    """Coerce a stream, a raw Generator, an int seed, or None to a Generator."""
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot interpret {type(rng).__name__} as a random source")
