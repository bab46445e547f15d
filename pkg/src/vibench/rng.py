"""Deterministic, portable pseudo-random streams.

Every random choice the library makes (batch index draws, snapshot refresh
coin flips, generated matrices, probe points) comes from the SplitMix64
generator defined here.  The algorithm is fixed and documented so that runs
reproduce bit-for-bit across platforms and across the compiled and pure
execution backends, which implement the identical integer recurrence.

SplitMix64 (Steele, Lea & Flood's mixing of a 64-bit Weyl sequence):

    state  = (state + 0x9E3779B97F4A7C15) mod 2^64
    z      = state
    z      = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z      = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output = z XOR (z >> 31)

Derived quantities, in draw order:

* ``next_double``: ``(output >> 11) * 2**-53`` in ``[0, 1)``.
* ``next_index(n)``: ``int(next_double() * n)``, clamped to ``n - 1``
  (the clamp guards the rare upward rounding of ``u * n``).
* ``bernoulli(p)``: ``next_double() < p``.
* ``normals``: Box-Muller pairs.  Per pair, two raw draws ``z1, z2``:
  ``u1 = ((z1 >> 11) + 1) * 2**-53`` in ``(0, 1]``,
  ``u2 = (z2 >> 11) * 2**-53``, then
  ``r*cos(2*pi*u2), r*sin(2*pi*u2)`` with ``r = sqrt(-2*ln(u1))``.
  An odd request still consumes a whole pair and discards the second value.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_WEYL = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO53_INV = 2.0 ** -53
_TWO_PI = 6.283185307179586


def mix64(value: int) -> int:
    """One SplitMix64 output for the given state value (stateless form)."""
    s = (value + _WEYL) & _MASK64
    s = ((s ^ (s >> 30)) * _MIX1) & _MASK64
    s = ((s ^ (s >> 27)) * _MIX2) & _MASK64
    return s ^ (s >> 31)


def derive_stream_seed(seed: int, run_index: int) -> int:
    """Per-run stream seed: one generator output of ``seed XOR run_index``.

    Used by the benchmark harness so that every run in an experiment has a
    stream that depends only on the config, never on scheduling order.
    """
    return mix64((seed ^ run_index) & _MASK64)


class SplitMix64:
    """Stateful SplitMix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        s = (self.state + _WEYL) & _MASK64
        self.state = s
        s = ((s ^ (s >> 30)) * _MIX1) & _MASK64
        s = ((s ^ (s >> 27)) * _MIX2) & _MASK64
        return s ^ (s >> 31)

    def next_double(self) -> float:
        return (self.next_u64() >> 11) * _TWO53_INV

    def next_index(self, n: int) -> int:
        j = int(self.next_double() * n)
        return n - 1 if j >= n else j

    def indices(self, n: int, count: int) -> tuple[int, ...]:
        return tuple(self.next_index(n) for _ in range(count))

    def bernoulli(self, p: float) -> bool:
        return self.next_double() < p

    def normals(self, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.float64)
        i = 0
        while i < count:
            u1 = ((self.next_u64() >> 11) + 1) * _TWO53_INV
            u2 = (self.next_u64() >> 11) * _TWO53_INV
            r = math.sqrt(-2.0 * math.log(u1))
            t = _TWO_PI * u2
            out[i] = r * math.cos(t)
            i += 1
            if i < count:
                out[i] = r * math.sin(t)
                i += 1
        return out
