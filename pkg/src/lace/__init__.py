"""Linearly adaptive cross entropy: losses, a small training stack, and an
experiment harness comparing it with standard cross entropy."""

from .losses import (
    BatchLoss,
    LossOutput,
    adaptive_cross_entropy,
    batch_loss,
    cross_entropy,
    gradient_scale_factor,
    jeffreys_divergence,
    jeffreys_one_hot_decomposition,
    kl_divergence,
    smoothed_one_hot,
    softmax,
)
from .numeric import Rng, matmul

__version__ = "0.1.0"
