"""Parameter-free sinusoidal embedding of a feature vector and a timestep."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EmbeddingConfig:
    dim: int = 128  # D, latent width, must be even
    feature_scale: float = 500.0  # s1
    time_scale: float = 0.5  # s2

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 2:
            raise ValueError(f"embedding dim must be a positive even integer, got {self.dim}")
        if self.feature_scale <= 0 or self.time_scale <= 0:
            raise ValueError("embedding scales must be positive")

    @property
    def gamma(self) -> float:
        return 10000.0 ** (-2.0 / self.dim)


def _frequencies(config: EmbeddingConfig) -> np.ndarray:
    return config.gamma ** np.arange(config.dim // 2)


def psi_table(index, s: float, config: EmbeddingConfig) -> np.ndarray:
    """Rows of interleaved ``sin, cos`` at frequencies gamma**k * s * j.

    ``index`` may be a scalar or an array of positive indices; the output has
    one trailing axis of length D appended to its shape.
    """
    j = np.asarray(index, dtype=np.float64)
    angle = j[..., None] * (s * _frequencies(config))
    out = np.empty(j.shape + (config.dim,))
    out[..., 0::2] = np.sin(angle)
    out[..., 1::2] = np.cos(angle)
    return out


def psi(j: int, s: float, config: EmbeddingConfig) -> np.ndarray:
    if j < 1:
        raise ValueError(f"psi index must be >= 1, got {j}")
    return psi_table(j, s, config)


def embed_batch(x: np.ndarray, t, config: EmbeddingConfig, n_steps: int | None = None) -> np.ndarray:
    """Embed a batch ``x`` of shape (B, d) with timesteps ``t`` (B,) into (B, d+1, D).

    Feature row j is ``x_j * psi(j, s1)`` with 1-based j; the final row is
    ``psi(t, s2)``.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t)
    if x.ndim != 2 or t.shape != (x.shape[0],):
        raise ValueError(f"expected x (B, d) and t (B,), got {x.shape} and {t.shape}")
    if t.size and (t.min() < 1 or (n_steps is not None and t.max() > n_steps)):
        raise ValueError(f"timestep out of range [1, {n_steps}]")
    d = x.shape[1]
    feature_rows = psi_table(np.arange(1, d + 1), config.feature_scale, config)  # (d, D)
    out = np.empty((x.shape[0], d + 1, config.dim))
    out[:, :d, :] = x[:, :, None] * feature_rows[None, :, :]
    out[:, d, :] = psi_table(t, config.time_scale, config)
    return out


def embed(x, t: int, config: EmbeddingConfig, n_steps: int = 1000) -> np.ndarray:
    """Single-record version of :func:`embed_batch`, returning (d+1, D)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("feature vector contains non-finite values")
    if not 1 <= t <= n_steps:
        raise ValueError(f"timestep {t} outside [1, {n_steps}]")
    return embed_batch(x[None, :], np.array([t]), config, n_steps)[0]
