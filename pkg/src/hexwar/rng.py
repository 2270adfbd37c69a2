"""SplitMix64 random number generation.

All randomness in the framework flows through this module so that every
simulation, agent decision, and tuning run is reproducible bit-for-bit from
a 64-bit seed. The generator state is a plain int, cheap to store inside a
game state and to copy.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def advance(state: int) -> tuple[int, int]:
    """Advance the generator once; returns (mixed 64-bit output, new state)."""
    state = (state + GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    z = z ^ (z >> 31)
    return z, state


def to_unit(z: int) -> float:
    """Map a 64-bit output to [0, 1) using the top 53 bits."""
    return (z >> 11) * (1.0 / (1 << 53))


def draw_uniform(state: int) -> tuple[float, int]:
    """One uniform draw in [0, 1); returns (value, new generator state)."""
    z, state = advance(state)
    return to_unit(z), state


def mix_seed(seed: int) -> int:
    """One mixing round over a raw seed, used to initialise generator states."""
    z, _ = advance(seed & MASK64)
    return z


def derive(seed: int, *salts: int) -> int:
    """Derive an independent stream seed from a base seed and integer salts."""
    state = seed & MASK64
    for salt in salts:
        state = mix_seed(state ^ (salt & MASK64))
    return mix_seed(state)


class Stream:
    """Stateful convenience wrapper over the SplitMix64 sequence."""

    __slots__ = ("state", "_spare_normal")

    def __init__(self, seed: int):
        self.state = mix_seed(seed)
        self._spare_normal: float | None = None

    def bits64(self) -> int:
        z, self.state = advance(self.state)
        return z

    def uniform(self) -> float:
        return to_unit(self.bits64())

    def randrange(self, n: int) -> int:
        """Integer in [0, n). Multiply-shift mapping; bias is < 2**-53 for small n."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        return (self.bits64() * n) >> 64

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller normal deviate."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
        else:
            # u1 in (0, 1] to keep log finite
            u1 = 1.0 - self.uniform()
            u2 = self.uniform()
            radius = math.sqrt(-2.0 * math.log(u1))
            z = radius * math.cos(2.0 * math.pi * u2)
            self._spare_normal = radius * math.sin(2.0 * math.pi * u2)
        return mu + sigma * z
