"""Seeded random streams.

Generator: xoshiro256** (Blackman & Vigna), state seeded by SplitMix64.
Stream derivation is counter based::

    key   = splitmix64_mix(splitmix64_mix(seed) + (stream_index + 1) * GOLDEN)
    state = four successive SplitMix64 outputs starting from ``key``

Uniform integers on [1..n] use Lemire's multiply-shift with rejection: with
``m = x * n`` as a 128-bit product, draws whose low word falls below
``2**64 mod n`` are rejected and the high word is returned (plus one). This is
exactly unbiased and needs a division only on the rare slow path. Doubles are ``(x >> 11) * 2**-53`` in [0, 1) and
exponentials are ``-log(1 - u)``.

All kernels are numba-compiled and operate on a ``uint64[4]`` state array, so
the same stream can be advanced from Python or from inside another kernel.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


@nb.njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def splitmix64_mix(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def seed_state(seed, stream_index, state):
    """Fill ``state`` (uint64[4]) for stream ``(seed, stream_index)``."""
    key = splitmix64_mix(splitmix64_mix(np.uint64(seed)) + (np.uint64(stream_index) + np.uint64(1)) * GOLDEN)
    x = key
    for i in range(4):
        x = x + GOLDEN
        state[i] = splitmix64_mix(x)
    # all-zero state is a fixed point of xoshiro
    if state[0] == 0 and state[1] == 0 and state[2] == 0 and state[3] == 0:
        state[0] = GOLDEN


@nb.njit(cache=True)
def next_u64(state):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    result = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


@nb.njit(cache=True, inline="always")
def _mul128(a, b):
    """(high, low) 64-bit words of the 128-bit product a * b."""
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _LO32) + (hl & _LO32)
    high = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    low = (mid << _S32) | (ll & _LO32)
    return high, low


@nb.njit(cache=True)
def uniform_int(state, n):
    """Unbiased uniform integer on [1..n], n >= 1."""
    un = np.uint64(n)
    high, low = _mul128(next_u64(state), un)
    if low < un:
        # (2**64 - n) % n == 2**64 % n
        threshold = (np.uint64(0) - un) % un
        while low < threshold:
            high, low = _mul128(next_u64(state), un)
    return np.int64(high) + 1


@nb.njit(cache=True)
def uniform01(state):
    return np.float64(next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def exponential(state):
    """Exp(1) draw."""
    return -math.log(1.0 - uniform01(state))


def mix(seed: int, stream_index: int) -> int:
    """Stream key for ``(seed, stream_index)`` as a Python int."""
    return int(splitmix64_mix(np.uint64(int(splitmix64_mix(np.uint64(seed & _MASK64)))
                                        + ((stream_index + 1) * int(GOLDEN)) & _MASK64)))


class RandomStream:
    """A reproducible stream identified by ``(seed, stream_index)``.

    The generator state lives in ``self.state`` and is advanced in place by
    every draw, whether from Python or from a compiled kernel.
    """

    def __init__(self, seed: int = 0, stream_index: int = 0):
        if stream_index < 0:
            raise ValueError("stream_index must be non-negative")
        self.seed = int(seed) & _MASK64
        self.stream_index = int(stream_index)
        self.state = np.empty(4, dtype=np.uint64)
        seed_state(np.uint64(self.seed), np.uint64(self.stream_index), self.state)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_index={self.stream_index})"

    def substream(self, tag: int) -> "RandomStream":
        """An independent stream keyed off this one's identity and ``tag``."""
        return RandomStream(mix(self.seed, self.stream_index), tag)

    def next_u64(self) -> int:
        return int(next_u64(self.state))

    def uniform_int(self, n: int) -> int:
        if not 1 <= n < 2**63:
            raise ValueError("n must lie in [1, 2**63)")
        return int(uniform_int(self.state, n))

    def random(self) -> float:
        return float(uniform01(self.state))

    def exponential(self) -> float:
        return float(exponential(self.state))
