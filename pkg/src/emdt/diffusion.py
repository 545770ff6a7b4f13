"""Linear-schedule DDPM: forward corruption, minibatch training, ancestral sampling."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import numeric as nm
from .denoiser import DenoiserConfig, init_params, loss_and_grads, predict_noise_batch

log = logging.getLogger(__name__)


class ScheduleError(ValueError):
    pass


class TrainingError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, detail: str = "non-finite loss"):
        self.epoch, self.batch = epoch, batch
        super().__init__(f"{detail} at epoch {epoch}, batch {batch}")


class SamplingError(FloatingPointError):
    def __init__(self, t: int):
        self.t = t
        super().__init__(f"non-finite value in reverse chain at t={t}")


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.betas)

    def beta(self, t):
        return self.betas[np.asarray(t) - 1]

    def alpha(self, t):
        return self.alphas[np.asarray(t) - 1]

    def alpha_bar(self, t):
        """Cumulative product up to ``t``; ``alpha_bar(0) == 1``."""
        t = np.asarray(t)
        return np.where(t == 0, 1.0, self.alpha_bars[np.maximum(t, 1) - 1])

    def sigma(self, t):
        t = np.asarray(t)
        return np.sqrt((1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * self.beta(t))


def build_schedule(n_steps: int = 1000, beta_start: float = 0.001, beta_end: float = 0.02) -> NoiseSchedule:
    if n_steps < 1:
        raise ScheduleError(f"need at least one timestep, got {n_steps}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ScheduleError(f"require 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    if n_steps == 1:
        betas = np.array([beta_start])
    else:
        betas = beta_start + np.arange(n_steps) * ((beta_end - beta_start) / (n_steps - 1))
        betas[-1] = beta_end
    alphas = 1.0 - betas
    return NoiseSchedule(betas, alphas, np.cumprod(alphas))


def forward_sample(x0, t, eps, schedule: NoiseSchedule) -> np.ndarray:
    """Corrupt ``x0`` to timestep ``t`` in one shot.  ``t`` may be per-row."""
    x0 = np.asarray(x0, dtype=np.float64)
    ab = np.asarray(schedule.alpha_bar(t), dtype=np.float64)
    if ab.ndim == 1 and x0.ndim == 2:
        ab = ab[:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * np.asarray(eps)


def reconstruct_x0(x_t, t, eps_hat, schedule: NoiseSchedule) -> np.ndarray:
    ab = schedule.alpha_bar(t)
    return (x_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def posterior_mean(x_t, t: int, eps_hat, schedule: NoiseSchedule, literal: bool = False) -> np.ndarray:
    """Mean of the reverse step.

    The default reconstructs x0 from the predicted noise and applies the
    posterior coefficients to (x0, x_t).  ``literal=True`` plugs the noise
    prediction straight into the x0 slot instead.
    """
    if t < 1 or t > schedule.n_steps:
        raise ValueError(f"timestep {t} outside [1, {schedule.n_steps}]")
    ab, ab_prev = float(schedule.alpha_bar(t)), float(schedule.alpha_bar(t - 1))
    beta, alpha = float(schedule.beta(t)), float(schedule.alpha(t))
    c0 = np.sqrt(ab_prev) * beta / (1.0 - ab)
    ct = np.sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab)
    first = eps_hat if literal else reconstruct_x0(x_t, t, eps_hat, schedule)
    return c0 * first + ct * x_t


def posterior_step(x_t, t: int, eps_hat, schedule: NoiseSchedule, z, literal: bool = False) -> np.ndarray:
    mu = posterior_mean(x_t, t, eps_hat, schedule, literal)
    if t == 1:
        return mu
    return mu + float(schedule.sigma(t)) * z


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: int = 64
    lr: float = 3e-3
    n_steps: int = 1000
    beta_start: float = 0.001
    beta_end: float = 0.02
    seed: int = 0
    lr_decay: str = "linear"  # "none" or "linear" (anneal to zero over training)
    ema_decay: float = 0.99  # 0 disables the parameter moving average

    def __post_init__(self):
        if self.lr_decay not in ("none", "linear"):
            raise ValueError(f"lr_decay must be 'none' or 'linear', got {self.lr_decay!r}")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    loss_trace: list[float] = field(default_factory=list)


def train(
    data: np.ndarray,
    config: TrainConfig,
    denoiser_config: DenoiserConfig,
    params: dict[str, np.ndarray] | None = None,
) -> TrainResult:
    """Fit the noise predictor by minibatch Adam; one pass over ``data`` per epoch."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or len(data) == 0:
        raise ValueError(f"training data must be a non-empty (n, d) matrix, got {data.shape}")
    if denoiser_config.n_steps != config.n_steps:
        raise ValueError("denoiser and training configs disagree on the number of timesteps")
    schedule = build_schedule(config.n_steps, config.beta_start, config.beta_end)
    if params is None:
        params = init_params(denoiser_config, nm.Prng(denoiser_config.seed))
    prng = nm.Prng(config.seed)
    state = nm.AdamState()
    n, d = data.shape
    steps_per_epoch = -(-n // config.batch_size)
    total_steps = max(1, config.epochs * steps_per_epoch)
    ema = {k: v.copy() for k, v in params.items()} if config.ema_decay else None
    trace = []
    step = 0
    for epoch in range(config.epochs):
        order = prng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            x0 = data[order[start:start + config.batch_size]]
            t = prng.integers(1, config.n_steps + 1, size=len(x0))
            eps = prng.normal(x0.shape)
            x_t = forward_sample(x0, t, eps, schedule)
            loss, grads = loss_and_grads(x_t, t, eps, params, denoiser_config)
            if not np.isfinite(loss):
                raise TrainingError(epoch, b)
            lr = config.lr
            if config.lr_decay == "linear":
                lr *= 1.0 - step / total_steps
            try:
                params, state = nm.adam_update(params, grads, state, lr)
            except nm.NonFiniteGradientError as exc:
                raise TrainingError(epoch, b, str(exc)) from exc
            if ema is not None:
                for k, v in params.items():
                    ema[k] = config.ema_decay * ema[k] + (1.0 - config.ema_decay) * v
            step += 1
            total += loss * len(x0)
        trace.append(total / n)
        if epoch % 25 == 0 or epoch == config.epochs - 1:
            log.debug("epoch %d loss %.5f", epoch, trace[-1])
    return TrainResult(params if ema is None else ema, trace)


def sample(
    count: int,
    n_features: int,
    params: dict[str, np.ndarray],
    denoiser_config: DenoiserConfig,
    schedule: NoiseSchedule,
    prng: nm.Prng,
    literal: bool = False,
) -> np.ndarray:
    """Ancestral sampling from pure noise down to t = 1, in standardized space."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return np.empty((0, n_features))
    x = prng.normal((count, n_features))
    for t in range(schedule.n_steps, 0, -1):
        eps_hat = predict_noise_batch(x, np.full(count, t), params, denoiser_config)
        z = prng.normal(x.shape) if t > 1 else 0.0
        x = posterior_step(x, t, eps_hat, schedule, z, literal)
        if not np.all(np.isfinite(x)):
            raise SamplingError(t)
    return x
