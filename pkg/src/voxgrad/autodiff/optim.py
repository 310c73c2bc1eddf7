"""Plain SGD with optional momentum and L2 weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from voxgrad.autodiff.tensor import Tensor


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0

    def __post_init__(self):
        # 0 is allowed: it freezes weights, which the determinism checks rely on
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}")


def sgd_step(weights: Iterable[Tensor], config: OptimConfig,
             velocity: dict[int, np.ndarray] | None = None,
             grads: Iterable[np.ndarray] | None = None) -> None:
    """Update ``weights`` in place from their gradients.

    Per parameter: ``v <- mu*v + (g + wd*w)`` then ``w <- w - lr*v``.
    ``velocity`` carries momentum buffers between calls (keyed by parameter
    identity); without it every call starts from zero velocity. ``grads``
    overrides the ``.grad`` slots.
    """
    weights = list(weights)
    grads = [p.grad for p in weights] if grads is None else list(grads)
    if len(grads) != len(weights):
        raise ValueError(f"sgd_step: {len(grads)} gradients for {len(weights)} parameters")
    if velocity is None:
        velocity = {}
    for p, g in zip(weights, grads):
        if g is None:
            raise ValueError(f"sgd_step: parameter {p.name or p.shape} has no gradient")
        if g.shape != p.shape:
            raise ValueError(f"sgd_step: gradient shape {g.shape} != parameter shape {p.shape}")
        if config.weight_decay:
            g = g + config.weight_decay * p.data
        if config.momentum:
            v = velocity.get(id(p))
            v = g.copy() if v is None else config.momentum * v + g
            velocity[id(p)] = v
            g = v
        if config.learning_rate:
            p.data -= config.learning_rate * g


@dataclass
class SGD:
    """SGD that keeps its own momentum buffers across steps."""

    config: OptimConfig
    velocity: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def step(self, params: Iterable[Tensor], grads: Iterable[np.ndarray] | None = None) -> None:
        sgd_step(params, self.config, self.velocity, grads)
