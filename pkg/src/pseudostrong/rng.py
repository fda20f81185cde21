"""Portable, splittable pseudo-random generator.

The core is SplitMix64 (Steele, Lea & Flood 2014)::

    state = (state + 0x9E3779B97F4A7C15) mod 2**64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    output z ^ (z >> 31)

Derived draws, each consuming the stated number of 64-bit outputs:

* ``uniform``: one output ``x``; returns ``(x >> 11) * 2**-53`` in [0, 1).
* ``normal``: two uniforms ``u1, u2``; Box-Muller cosine branch,
  ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.
* ``randint(lo, hi)``: one uniform ``u``; ``lo + floor(u * (hi - lo + 1))``.
* ``poisson(lam)``: counts unit-rate exponential arrivals
  ``-ln(1 - u)`` until their running sum reaches ``lam``; consumes
  ``k + 1`` uniforms for a result of ``k``.

``Rng.split(key)`` seeds an independent child stream with output number
``key`` (0-based) of a fresh generator on the parent's seed, so children
can be produced in any order or in parallel.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed


class Rng:
    __slots__ = ("seed", "_state")

    def __init__(self, seed: int):
        self.seed = check_seed(seed)
        self._state = seed

    def next_u64(self) -> int:
        self._state = (self._state + GAMMA) & MASK64
        return mix64(self._state)

    def split(self, key: int) -> "Rng":
        return Rng(mix64((self.seed + (key + 1) * GAMMA) & MASK64))

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0**-53
        if lo == 0.0 and hi == 1.0:
            return u
        return lo + (hi - lo) * u

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]`` (both inclusive)."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + int(self.uniform() * (hi - lo + 1))

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def poisson(self, lam: float) -> int:
        k = 0
        t = -math.log(1.0 - self.uniform())
        while t < lam:
            k += 1
            t += -math.log(1.0 - self.uniform())
        return k
