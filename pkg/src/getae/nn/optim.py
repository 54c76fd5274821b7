"""SGD and Adam over named parameter dictionaries."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class OptimizerKind(str, Enum):
    SGD = "SGD"
    ADAM = "Adam"


@dataclass(frozen=True)
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        object.__setattr__(self, "kind", OptimizerKind(self.kind))


@dataclass
class AdamState:
    step: int = 0
    m: dict | None = None
    v: dict | None = None


def adam_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
                config: OptimizerConfig) -> dict[str, np.ndarray]:
    """In-place update of ``params``; SGD when ``config.kind`` says so."""
    for name, g in grads.items():
        if params[name].shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {params[name].shape}")
    lr = config.learning_rate
    if config.kind is OptimizerKind.SGD:
        for name, g in grads.items():
            params[name] -= lr * g
        return params
    if state.m is None:
        state.m = {k: np.zeros_like(v) for k, v in params.items()}
        state.v = {k: np.zeros_like(v) for k, v in params.items()}
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
    return params
