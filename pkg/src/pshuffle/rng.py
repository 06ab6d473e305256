"""SplitMix64 streams keyed by (seed, epoch).

Everything here is plain 64-bit integer arithmetic so a shuffle drawn in one
process (or language) can be replayed bit-for-bit in another.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def _avalanche(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def splitmix64_mix(value: int) -> int:
    """One SplitMix64 output for state ``value`` (gamma add, then avalanche)."""
    return _avalanche((value + GOLDEN_GAMMA) & MASK64)


class RngStream:
    """Mutable SplitMix64 generator. Not safe to share across threads."""

    __slots__ = ("state",)

    def __init__(self, state: int = 0):
        self.state = state & MASK64

    def __repr__(self) -> str:
        return f"RngStream(state=0x{self.state:016x})"

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _avalanche(self.state)

    def next_bounded(self, bound: int) -> int:
        """Draw from [0, bound) by modulo reduction.

        The modulo bias is below bound / 2**64, which is irrelevant for row
        lengths and sentence counts.
        """
        if bound < 1:
            raise ValueError(f"bound must be >= 1, got {bound}")
        return self.next_u64() % bound

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, n: int) -> np.ndarray:
        """``n`` calls of :meth:`next_float` at once, as a float64 array."""
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GOLDEN_GAMMA)
            z = steps + np.uint64(self.state)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
            z ^= z >> np.uint64(31)
        self.state = (self.state + n * GOLDEN_GAMMA) & MASK64
        return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def copy(self) -> RngStream:
        return RngStream(self.state)


def derive_stream(seed: int, epoch: int) -> RngStream:
    """Independent stream for one (seed, epoch) pair.

    Negative seeds are taken modulo 2**64.
    """
    return RngStream(splitmix64_mix((seed & MASK64) ^ splitmix64_mix(epoch & MASK64)))
