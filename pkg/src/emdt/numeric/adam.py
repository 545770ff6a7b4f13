from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"non-finite gradient for parameter {name!r}; update rejected")


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam step.

    Returns a new parameter dict; ``state`` is advanced in place and returned.
    The whole update is rejected (state untouched) if any gradient is
    non-finite.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)

    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    new = {}
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1 - state.beta1) * g if m is None else state.beta1 * m + (1 - state.beta1) * g
        v = (1 - state.beta2) * g * g if v is None else state.beta2 * v + (1 - state.beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        if lr == 0:
            new[name] = p.copy()
        else:
            new[name] = p - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return new, state
