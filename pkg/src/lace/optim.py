"""SGD with momentum and coupled weight decay, plus a step-decay schedule."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

import numpy as np


@dataclass(frozen=True)
class SgdConfig:
    lr0: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    step_size: int = 50
    gamma: float = 0.1
    # 1-D parameters are biases; set False to exempt them from weight decay
    decay_biases: bool = True

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if int(self.step_size) != self.step_size or self.step_size < 1:
            raise ValueError(f"step_size must be a positive integer, got {self.step_size}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")


def step_lr(cfg: SgdConfig, epoch: int) -> float:
    """lr0 * gamma ** (epoch // step_size), epochs counted from 0.

    The power is taken in decimal arithmetic and rounded once, so defaults
    give exactly 0.01 at epoch 50 rather than 0.010000000000000002.
    """
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    drops = epoch // cfg.step_size
    return float(Decimal(repr(cfg.lr0)) * Decimal(repr(cfg.gamma)) ** drops)


class SgdState:
    """Momentum buffers, one per parameter array, zero-initialised."""

    def __init__(self, params: list[np.ndarray]):
        self.velocity = [np.zeros_like(p) for p in params]


def sgd_step(params: list[np.ndarray], grads: list[np.ndarray], state: SgdState,
             cfg: SgdConfig, lr: float) -> list[np.ndarray]:
    """One in-place update of ``params``.

    g = grad + wd * param;  v = momentum * v + g;  param -= lr * v
    (no dampening, no Nesterov).
    """
    if not (len(params) == len(grads) == len(state.velocity)):
        raise ValueError(
            f"got {len(params)} params, {len(grads)} grads, {len(state.velocity)} buffers"
        )
    for i, (p, g, v) in enumerate(zip(params, grads, state.velocity)):
        if not (p.shape == g.shape == v.shape):
            raise ValueError(
                f"shape mismatch for parameter {i}: param {p.shape}, grad {g.shape}, "
                f"velocity {v.shape}"
            )
        if cfg.weight_decay and (cfg.decay_biases or p.ndim > 1):
            g = g + cfg.weight_decay * p
        v *= cfg.momentum
        v += g
        p -= lr * v
    return params
