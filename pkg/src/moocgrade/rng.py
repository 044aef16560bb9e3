"""Deterministic 64-bit RNG used for random walks and negative sampling.

SplitMix64 (Steele, Lea & Flood, the java.util.SplittableRandom update) is
used instead of a library generator wherever the pure-python and compiled
training paths must draw identical streams: the whole generator is a few
64-bit integer operations that behave the same on every platform.
"""

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# 1/2**53, the float step used to map the high 53 bits onto [0, 1)
_INV53 = 1.0 / 9007199254740992.0


def _finalize(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def mix64(*values: int) -> int:
    """Fold integers into a single well-mixed 64-bit seed.

    Used to derive independent stream seeds, e.g. per (node, walk index)
    or per pipeline stage, from one user-facing seed.
    """
    h = 0
    for v in values:
        h = _finalize((h + _GOLDEN + (v & MASK64)) & MASK64)
    return h


class SplitMix64:
    """Sequential SplitMix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        return _finalize(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1) from the high 53 bits."""
        return (self.next_u64() >> 11) * _INV53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) via the multiply-shift reduction."""
        return (self.next_u64() * n) >> 64
