"""Seedable random stream.

Uniform bits come from numpy's PCG64 generator.  Gaussians are produced by
the polar Box-Muller method from a buffer that is always refilled with the
same fixed-size block of uniforms, so the Gaussian sequence for a seed does
not depend on how callers chunk their requests.
"""
from __future__ import annotations

import numpy as np

_BLOCK = 4096  # uniform pairs consumed per refill


class Prng:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self._buf = np.empty(0)
        self._pos = 0

    def split(self, k: int) -> "Prng":
        """Independent stream for sub-task ``k`` (seed + k)."""
        return Prng(self.seed + k)

    def uniform(self, size=None):
        """Uniform variates in [0, 1)."""
        return self._gen.random(size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def _refill(self):
        u = 2.0 * self._gen.random((_BLOCK, 2)) - 1.0
        s = (u * u).sum(axis=1)
        ok = (s > 0.0) & (s < 1.0)
        u, s = u[ok], s[ok]
        f = np.sqrt(-2.0 * np.log(s) / s)
        fresh = (u * f[:, None]).ravel()
        self._buf = np.concatenate([self._buf[self._pos:], fresh])
        self._pos = 0

    def normal(self, shape=()) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        while len(self._buf) - self._pos < n:
            self._refill()
        out = self._buf[self._pos:self._pos + n]
        self._pos += n
        return out.reshape(shape).copy()

    def next_gaussian(self) -> float:
        return float(self.normal(1)[0])
