"""Counter-based pseudo-random streams with derived substreams.

Everything random in this package flows through one primitive: the SplitMix64
sequence ``u64(key, i) = mix64(key + (i + 1) * GOLDEN)``.  Because each draw is
a pure function of (key, counter), a stream can be evaluated out of order, in
vectorized blocks, or partially (skipping indices whose values are never
needed) without shifting any other draw.  Scalar, numpy-block, and
cross-process consumers therefore agree bit for bit by construction.

The same generator is deliberately trivial to port: 64-bit adds, multiplies,
xors, and shifts, all modulo 2**64.  Known-answer vectors are frozen in the
test suite and mirrored by the TypeScript worker client.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

# Stream roles hung off a per-run key; shared with the harness protocol.
STREAM_INPUT = 1
STREAM_LATENT = 2
STREAM_GUESS = 3
STREAM_WORKER = 4


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit scrambler."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return z ^ (z >> 31)


def u64_at(key: int, counter: int) -> int:
    """The counter-th 64-bit word of the stream keyed by ``key``."""
    return mix64((key + ((counter + 1) * GOLDEN)) & MASK64)


def derive_key(key: int, *indices: int) -> int:
    """Fold indices into a key, one per nesting level.

    For a fixed parent key the map ``index -> child key`` is injective, so
    distinct trials, stream roles, or worker ids never share a stream.
    """
    k = key & MASK64
    for t in indices:
        k = mix64((k + GOLDEN + mix64(t & MASK64)) & MASK64)
    return k


def uniform_at(key: int, counter: int) -> float:
    """Uniform double in [0, 1) from the counter-th word (53-bit mantissa)."""
    return (u64_at(key, counter) >> 11) * (2.0 ** -53)


def bit_at(key: int, counter: int) -> int:
    """Fair bit: the top bit of the counter-th word."""
    return u64_at(key, counter) >> 63


def u64_block(key: int, start: int, count: int) -> np.ndarray:
    """Vectorized ``u64_at(key, start + i)`` for i in range(count)."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + idx * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
        return z ^ (z >> np.uint64(31))


def uniform_block(key: int, start: int, count: int) -> np.ndarray:
    return (u64_block(key, start, count) >> np.uint64(11)) * (2.0 ** -53)


def bit_block(key: int, start: int, count: int) -> np.ndarray:
    """Fair bits as uint8, matching ``bit_at`` elementwise."""
    return (u64_block(key, start, count) >> np.uint64(63)).astype(np.uint8)


class Rng:
    """Sequential view of a counter-based stream.

    Mutable convenience wrapper; the underlying draws remain pure functions of
    (key, counter), so two instances with the same key replay identically.
    """

    def __init__(self, key: int):
        self.key = key & MASK64
        self.counter = 0

    def next_u64(self) -> int:
        value = u64_at(self.key, self.counter)
        self.counter += 1
        return value

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def bit(self) -> int:
        return self.next_u64() >> 63

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def randrange(self, n: int) -> int:
        """Integer in [0, n) by rejection, unbiased for n < 2**63."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        limit = (MASK64 + 1) - ((MASK64 + 1) % n)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % n

    def geometric_index(self) -> int:
        """Number of fair-bit failures before the first success.

        Returns j >= 0 with probability 2**-(j+1); terminates with
        probability one and needs two draws on average.
        """
        j = 0
        while self.bit() == 0:
            j += 1
        return j

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def shuffled(self, seq):
        items = list(seq)
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
