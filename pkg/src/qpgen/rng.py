"""Portable pseudo-random streams: splitmix64 seeding feeding xoshiro256++.

The generators are fixed so that surveys are reproducible bit-for-bit on any
platform and for any worker count.  Doubles are formed from the top 53 bits
of each 64-bit output.

The scalar classes here are the reference implementation; the vectorized
block generators used for Monte Carlo live in :mod:`qpgen.kernels` and are
tested against them.
"""
import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_TWO_M53 = 2.0 ** -53


def splitmix64(x):
    """One splitmix64 output for state ``x`` (the state advanced once)."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def xoshiro_state(seed):
    """Four-word xoshiro256++ state expanded from a 64-bit seed."""
    x = seed & MASK64
    out = []
    for _ in range(4):
        out.append(splitmix64(x))
        x = (x + GOLDEN_GAMMA) & MASK64
    return out


def sample_seed(master_seed, index):
    """Per-sample seed: ``splitmix64(master_seed XOR index)``."""
    return splitmix64((master_seed ^ index) & MASK64)


def substream_seed(seed, index):
    """Seed of the ``index``-th Monte-Carlo substream of ``seed``."""
    return splitmix64((seed ^ splitmix64(index)) & MASK64)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256pp:
    """Scalar xoshiro256++ generator.

    Parameters
    ----------
    seed : int
        64-bit seed, expanded with splitmix64.  Pass ``state`` instead to
        start from explicit words (used for reference vectors).
    """

    def __init__(self, seed=0, state=None):
        if state is None:
            state = xoshiro_state(seed)
        if len(state) != 4 or not any(state):
            raise ValueError("xoshiro256++ state must be four words, not all zero")
        self.s = [int(w) & MASK64 for w in state]

    def next_u64(self):
        s = self.s
        result = (_rotl((s[0] + s[3]) & MASK64, 23) + s[0]) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self):
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _TWO_M53

    def uniforms(self, n):
        return np.array([self.random() for _ in range(n)], dtype=np.float64)

    def normals(self, n):
        """``n`` standard normals by Box-Muller over consecutive uniform pairs."""
        out = np.empty(n, dtype=np.float64)
        for i in range(0, n, 2):
            u1 = 1.0 - self.random()
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            out[i] = r * math.cos(2.0 * math.pi * u2)
            if i + 1 < n:
                out[i + 1] = r * math.sin(2.0 * math.pi * u2)
        return out


TORUS_CHUNK = 4096


def uniform_torus_points(seed, samples, d, chunk=TORUS_CHUNK):
    """``samples`` i.i.d. uniform points of T^d as a (samples, d) array.

    Sample ``k`` belongs to substream ``k // chunk``; each substream is an
    independent xoshiro256++ stream seeded by :func:`substream_seed`, so the
    result does not depend on how the chunks are scheduled.
    """
    from . import kernels

    nchunks = -(-samples // chunk)
    seeds = np.array([substream_seed(seed, j) for j in range(nchunks)], dtype=np.uint64)
    u = kernels.xoshiro_uniform(seeds, chunk * d)
    return np.ascontiguousarray(u.reshape(nchunks * chunk, d)[:samples])
