"""Deterministic random number generation.

All randomness in this package flows through :class:`Rng`, a thin wrapper
around numpy's counter-based Philox (4x64) bit generator. Normal variates
use numpy's ziggurat sampler. Given the same 64-bit seed, the stream of
variates is identical across platforms and across in-core / out-of-core
code paths.

Parallel or multi-stage computations never share a stream: each stage
derives an independent child seed with :meth:`Rng.child`, a pure function
of (seed, tag).
"""

import numpy as np

from .errors import ArgumentError

ALGORITHM = "philox4x64/ziggurat"

_MASK64 = (1 << 64) - 1


def _fnv1a64(text):
    # FNV-1a over the UTF-8 tag bytes; stable across platforms.
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class Rng:
    """Seeded random stream.

    Parameters
    ----------
    seed : int
        64-bit seed; negative values and values above 2**64 are wrapped.
    """

    algorithm = ALGORITHM

    def __init__(self, seed):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def __repr__(self):
        return f"Rng(seed={self.seed}, algorithm={self.algorithm!r})"

    def child(self, tag):
        """Derive an independent stream, deterministically, from a string tag."""
        return Rng(_splitmix64(self.seed ^ _fnv1a64(tag)))

    def standard_normal(self, shape):
        return self._gen.standard_normal(shape)

    def uniform(self, shape, low=0.0, high=1.0):
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n):
        return self._gen.permutation(n)


def child_seed(seed, tag):
    """Child seed as a plain integer (same derivation as :meth:`Rng.child`)."""
    return _splitmix64((int(seed) & _MASK64) ^ _fnv1a64(tag))


def gaussian_matrix(rows, cols, rng):
    """Matrix with i.i.d. standard-normal entries, deterministic in the seed.

    Parameters
    ----------
    rows, cols : int
        Both must be >= 1.
    rng : Rng or int
        Stream to draw from; an integer is taken as a seed.

    Returns
    -------
    ndarray of shape (rows, cols), dtype float64.
    """
    if rows < 1 or cols < 1:
        raise ArgumentError(f"gaussian_matrix needs positive dims, got {rows}x{cols}")
    if not isinstance(rng, Rng):
        rng = Rng(rng)
    return rng.standard_normal((rows, cols))
