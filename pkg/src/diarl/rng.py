"""Deterministic pseudo-random generator used everywhere randomness is needed.

The generator is xoshiro256** (Blackman & Vigna) seeded through a splitmix64
stream, both implemented on plain 64-bit integer arithmetic so the exact draw
sequence can be reproduced in any language from the published algorithms.
One instance belongs to one session (or one benchmark run); nothing in the
package touches global random state.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Rng:
    """xoshiro256** generator with helpers for floats, bounded ints, gaussians.

    The seed expands to the four 64-bit state words via splitmix64, the
    standard seeding recipe for the xoshiro family.
    """

    def __init__(self, seed: int):
        sm = seed & _MASK64
        s = []
        for _ in range(4):
            sm, out = _splitmix64(sm)
            s.append(out)
        self._s = s
        self._gauss_cache: float | None = None

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), bias-free via rejection sampling."""
        if n <= 0:
            raise ValueError("bound must be positive")
        limit = (_MASK64 + 1) - ((_MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def gauss(self) -> float:
        """Standard normal via Box-Muller; the paired value is cached."""
        if self._gauss_cache is not None:
            z = self._gauss_cache
            self._gauss_cache = None
            return z
        # u1 shifted into (0, 1] so log() stays finite
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._gauss_cache = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def geometric(self, mean: float) -> int:
        """Geometric draw on {1, 2, ...} with the given mean (inversion method)."""
        if mean < 1.0:
            raise ValueError("mean must be >= 1")
        if mean == 1.0:
            return 1
        q = 1.0 / mean
        u = self.random()
        return 1 + int(math.log1p(-u) / math.log1p(-q))

    def state(self) -> dict:
        return {
            "s": list(self._s),
            "gauss_cache": self._gauss_cache,
        }

    @classmethod
    def from_state(cls, doc: dict) -> "Rng":
        rng = cls.__new__(cls)
        rng._s = [int(w) & _MASK64 for w in doc["s"]]
        rng._gauss_cache = doc["gauss_cache"]
        return rng
