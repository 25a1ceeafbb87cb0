"""Deterministic counter-based pseudo-random generation (splitmix64).

Every random draw in the library comes from this module so that any run is a
pure function of its seeds, independent of numpy's global state. The exact
recurrence is frozen here so another implementation can reproduce streams
bit-for-bit:

    state_{n+1} = (state_n + 0x9E3779B97F4A7C15) mod 2^64
    output_n    = mix64(state_{n+1})

    mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9  (mod 2^64)
              z ^= z >> 27; z *= 0x94D049BB133111EB  (mod 2^64)
              z ^= z >> 31

Uniform doubles in [0, 1) take the top 53 bits: (output >> 11) * 2^-53.
Normal draws use the Box-Muller transform on consecutive uniform pairs
(z0 uses cos, z1 uses sin; both are consumed in order).

Sub-streams are derived with `derive_seed(root, *keys)`:

    s = mix64(root)
    for each key: s = mix64(s XOR h(key))

where h is mix64 for integer keys and 64-bit FNV-1a over UTF-8 bytes for
string keys.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x00000100000001B3


def mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def derive_seed(root: int, *keys: int | str) -> int:
    s = mix64(root)
    for key in keys:
        if isinstance(key, str):
            s = mix64(s ^ fnv1a64(key))
        else:
            s = mix64(s ^ mix64(key))
    return s


class SplitMix64:
    """Sequential splitmix64 stream."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return mix64(self._state)

    def next_f64(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def next_index(self, n: int) -> int:
        # rejection-free modulo; bias is irrelevant at desk-scale n << 2^64
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, consuming one draw per swap."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_index(i + 1)
            items[i], items[j] = items[j], items[i]


def uniform_array(seed: int, n: int) -> np.ndarray:
    """First n uniforms of the stream seeded at `seed`, vectorized.

    Bit-identical to calling SplitMix64(seed).next_f64() n times: splitmix64
    is counter-based, so output_i = mix64(seed + (i+1)*GAMMA).
    """
    if n == 0:
        return np.zeros(0)
    idx = np.arange(1, n + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + idx * np.uint64(_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normal_array(seed: int, n: int) -> np.ndarray:
    """First n Box-Muller normals of the stream seeded at `seed`."""
    pairs = (n + 1) // 2
    u = uniform_array(seed, 2 * pairs)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))  # log1p(-u) = log(1-u), u < 1 always
    theta = (2.0 * math.pi) * u2
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:n]
