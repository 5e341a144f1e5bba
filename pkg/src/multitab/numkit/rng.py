"""Seeded random streams.

Backed by numpy's PCG64 bit generator. Streams are reproducible for a fixed
seed within one numpy build; nothing is promised across builds.
"""
import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One round of the splitmix64 finaliser (used to derive child seeds)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed, *stream):
    """Deterministic child seed from ``seed`` and integer stream labels."""
    out = int(seed) & _MASK64
    for label in stream:
        out = splitmix64((out + int(label)) & _MASK64)
    return out


class Rng:
    def __init__(self, seed):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return f"Rng(seed={self.seed})"

    def child(self, *stream):
        return Rng(derive_seed(self.seed, *stream))

    def normal(self, shape, scale=1.0):
        return self._gen.standard_normal(shape) * scale

    def uniform(self, shape, low=0.0, high=1.0):
        return self._gen.uniform(low, high, shape)

    def permutation(self, n):
        return self._gen.permutation(n)

    def integers(self, low, high, shape=None):
        return self._gen.integers(low, high, shape)


def sample_normal(rng, shape):
    """i.i.d. standard normal draws as a float64 array of ``shape``."""
    return rng.normal(shape)
