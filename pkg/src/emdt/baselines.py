"""SMOTE: synthetic minority rows by interpolation toward a random nearest neighbor."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import Prng


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    m: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.m < 0:
            raise ValueError("m must be >= 0")


@dataclass(frozen=True)
class SmoteResult:
    samples: np.ndarray  # (m, d)
    base: np.ndarray  # index i of the base point per row
    neighbor: np.ndarray  # index j of the chosen neighbor per row
    lam: np.ndarray  # interpolation weight per row
    neighbors: np.ndarray  # (n, k) neighbor table used


def nearest_neighbors(X: np.ndarray, k: int) -> np.ndarray:
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def smote(X_min: np.ndarray, config: SmoteConfig) -> SmoteResult:
    """Generate ``config.m`` rows ``x_i + lam * (x_j - x_i)``.

    Base points are visited round-robin in a seeded random order; ``j`` is a
    uniform pick among the ``k`` nearest minority neighbors of ``i`` and
    ``lam ~ U[0, 1)``.
    """
    X = np.asarray(X_min, dtype=np.float64)
    n = len(X)
    if n <= config.k:
        raise ValueError(f"SMOTE with k={config.k} needs more than {config.k} minority rows, got {n}")
    nbrs = nearest_neighbors(X, config.k)
    prng = Prng(config.seed)
    m = config.m
    order = prng.permutation(n)
    base = order[np.arange(m) % n]
    pick = prng.integers(0, config.k, size=m)
    neighbor = nbrs[base, pick]
    lam = prng.uniform(m)
    samples = X[base] + lam[:, None] * (X[neighbor] - X[base])
    return SmoteResult(samples.reshape(m, X.shape[1]), base, neighbor, lam, nbrs)
