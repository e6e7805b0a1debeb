"""Portable seeded random numbers for data generation.

SplitMix64 is a counter-based generator: output k is a bit-mix of
seed + (k+1) * GAMMA, all in 64-bit wrapping arithmetic with the constants

    GAMMA = 0x9E3779B97F4A7C15
    M1    = 0xBF58476D1CE4E5B9
    M2    = 0x94D049BB133111EB

and mix(z) = h(h(g(z)) ) where g(z) = (z ^ (z >> 30)) * M1,
h(z) = (z ^ (z >> 27)) * M2 followed by z ^ (z >> 31).  Uniform doubles
take the top 53 bits of one output, scale by 2^-53 into [0, 1), and map
affinely onto [lo, hi).  Every step is integer or exact IEEE-754
arithmetic, so the stream is bit-identical on every platform.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_INV_2_53 = 2.0 ** -53


class SplitMix64:
    """Counter-based 64-bit generator with a documented bit stream."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _M1) & _MASK64
        z = ((z ^ (z >> 27)) * _M2) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits of one output."""
        return (self.next_uint64() >> 11) * _INV_2_53

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform double in [lo, hi) by affine scaling of next_float."""
        return lo + (hi - lo) * self.next_float()
