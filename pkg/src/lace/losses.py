"""Softmax, cross entropy and the linearly adaptive cross entropy.

All logarithms are natural (values are in nats). Loss functions take logits
rather than probabilities so that ``ln q_c`` can come from the log-sum-exp
form, which stays finite for any finite logits.

For a true class ``c`` with predicted probability ``q_c``:

    cross entropy        CE  = -ln q_c
    adaptive             Adp = -(1 - q_c) ln q_c  =  (1 - q_c) * CE

and their logit gradients differ by a per-sample scalar,

    dAdp/dz = k(q_c) * dCE/dz,   k(q) = 1 - q - q ln q,

so the adaptive gradient costs one subtraction and one multiplication on top
of the cross-entropy gradient.

The adaptive loss follows from the symmetric (Jeffreys) divergence between a
one-hot label P and the prediction Q: ``D(P, Q)`` collapses to ``-ln q_c``
and ``D(Q, P)``, keeping only the true-class term, to ``q_c ln q_c``. The
probability-level helpers at the bottom of this module exist to check that
chain numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12
LOG_PROB_FLOOR = math.log(PROB_FLOOR)

LOSS_NAMES = ("cross_entropy", "adaptive")


@dataclass(frozen=True)
class LossOutput:
    """Scalar loss (nats) and its gradient with respect to the logits."""

    value: float
    grad_logits: np.ndarray


@dataclass(frozen=True)
class BatchLoss:
    """Batch loss under mean reduction.

    ``grad_logits`` holds the *per-sample* gradients (one row per example);
    the gradient of ``value`` itself is ``grad_logits / n``. The network's
    backward pass performs that division.
    """

    value: float
    per_sample: np.ndarray
    grad_logits: np.ndarray


def _logits_array(logits) -> np.ndarray:
    z = np.asarray(logits)
    if not np.issubdtype(z.dtype, np.floating):
        z = z.astype(np.float64)
    if z.ndim not in (1, 2):
        raise ValueError(f"logits must be 1-D or 2-D, got shape {z.shape}")
    if z.shape[-1] < 2:
        raise ValueError(f"need at least 2 classes, got {z.shape[-1]}")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits contain non-finite values")
    return z


def _labels_array(labels, n: int, num_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim == 0:
        y = np.full(n, int(y))
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        raise TypeError("class labels must be integers")
    bad = (y < 0) | (y >= num_classes)
    if np.any(bad):
        raise ValueError(
            f"class index {int(y[bad][0])} out of range for {num_classes} classes"
        )
    return y.astype(np.intp)


def _class_index(c, num_classes: int) -> int:
    if isinstance(c, (bool, np.bool_)) or not isinstance(c, (int, np.integer)):
        raise TypeError(f"class index must be an integer, got {c!r}")
    if not 0 <= c < num_classes:
        raise ValueError(f"class index {c} out of range for {num_classes} classes")
    return int(c)


def log_softmax(logits) -> np.ndarray:
    z = _logits_array(logits)
    m = z.max(axis=-1, keepdims=True)
    shifted = z - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits) -> np.ndarray:
    """Shift-stabilised softmax over the last axis."""
    z = _logits_array(logits)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _true_class_log_prob(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # ln q_c = z_c - (m + ln sum exp(z - m)), floored at ln(PROB_FLOOR)
    m = z.max(axis=-1)
    lse = m + np.log(np.exp(z - m[:, None]).sum(axis=-1))
    lq = z[np.arange(z.shape[0]), y] - lse
    return np.maximum(lq, LOG_PROB_FLOOR)


def loss_values(name: str, logits, labels) -> np.ndarray:
    """Per-sample loss values for a (n, C) logit matrix.

    The input dtype is preserved, which lets the finite-difference checker
    evaluate the losses in extended precision.
    """
    z = _logits_array(logits)
    if z.ndim == 1:
        z = z[None, :]
    y = _labels_array(labels, z.shape[0], z.shape[1])
    lq = _true_class_log_prob(z, y)
    if name == "cross_entropy":
        return -lq
    if name == "adaptive":
        return -(1 - np.exp(lq)) * lq
    raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")


def _loss_grads(name: str, z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = z.shape[0]
    rows = np.arange(n)
    lq = _true_class_log_prob(z, y)
    q = softmax(z)
    ce_grad = q.copy()
    ce_grad[rows, y] -= 1.0
    if name == "cross_entropy":
        return -lq, ce_grad
    if name == "adaptive":
        qc = np.exp(lq)
        # (q_c ln q_c + q_c - 1)(delta_ic - q_i), written as -coef * ce_grad
        coef = qc * lq + qc - 1.0
        return -(1 - qc) * lq, -coef[:, None] * ce_grad
    raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")


def cross_entropy(logits, c) -> LossOutput:
    """Cross entropy ``-ln q_c`` of one logit vector and its logit gradient.

    >>> out = cross_entropy([0.0, 0.0], 0)
    >>> round(out.value, 6), out.grad_logits.tolist()
    (0.693147, [-0.5, 0.5])
    """
    return _single("cross_entropy", logits, c)


def adaptive_cross_entropy(logits, c) -> LossOutput:
    """Linearly adaptive cross entropy ``-(1 - q_c) ln q_c``.

    The gradient is ``(q_c ln q_c + q_c - 1)(delta_ic - q_i)``. When ``q_c``
    underflows below ``PROB_FLOOR`` both the value and the gradient
    coefficient use the floored probability.
    """
    return _single("adaptive", logits, c)


def _single(name: str, logits, c) -> LossOutput:
    z = _logits_array(logits)
    if z.ndim != 1:
        raise ValueError("expected a single logit vector; use batch_loss for matrices")
    c = _class_index(c, z.shape[0])
    values, grads = _loss_grads(name, z[None, :], np.array([c]))
    return LossOutput(float(values[0]), grads[0])


def batch_loss(name: str, logits, labels) -> BatchLoss:
    """Mean loss over a batch plus per-sample logit gradients."""
    z = _logits_array(logits)
    if z.ndim != 2:
        raise ValueError("batch_loss expects a (n, C) logit matrix")
    y = _labels_array(labels, z.shape[0], z.shape[1])
    values, grads = _loss_grads(name, z, y)
    return BatchLoss(float(values.mean()), values, grads)


def gradient_scale_factor(q_c: float) -> float:
    """k(q) = 1 - q - q ln q, the ratio of adaptive to cross-entropy gradients.

    k rises from 1 (as q -> 0) to its maximum 1 + e^-2 at q = e^-2, then falls
    to 0 at q = 1.
    """
    q_c = float(q_c)
    if not 0.0 < q_c <= 1.0:
        raise ValueError(f"q_c must lie in (0, 1], got {q_c}")
    return 1.0 - q_c - q_c * math.log(q_c)


# -- probability-level helpers ------------------------------------------------


def _prob_vector(p, name: str) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise ValueError(f"{name} must be a probability vector with at least 2 entries")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if abs(arr.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1 (sum is {arr.sum()!r})")
    return arr


def kl_divergence(p, q) -> float:
    """D(P, Q) = sum p_i ln(p_i / q_i) with 0 ln(0/q) = 0."""
    p = _prob_vector(p, "p")
    q = _prob_vector(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    support = p > 0
    if np.any(q[support] == 0):
        raise ValueError("D(P, Q) is infinite: q_i = 0 where p_i > 0")
    ps, qs = p[support], q[support]
    return float(np.sum(ps * np.log(ps / qs)))


def jeffreys_divergence(p, q) -> float:
    """Symmetric divergence D(P, Q) + D(Q, P); needs strictly positive entries."""
    p = _prob_vector(p, "p")
    q = _prob_vector(q, "q")
    if np.any(p == 0) or np.any(q == 0):
        raise ValueError("Jeffreys divergence requires strictly positive entries")
    return kl_divergence(p, q) + kl_divergence(q, p)


def smoothed_one_hot(c: int, num_classes: int, eps: float) -> np.ndarray:
    """One-hot label with the zeros replaced by ``eps``.

    ``eps`` must be below 1/C so the true class keeps the largest mass.

    >>> smoothed_one_hot(1, 4, 0.01).tolist()
    [0.01, 0.97, 0.01, 0.01]
    """
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    c = _class_index(c, num_classes)
    if not 0.0 < eps < 1.0 / num_classes:
        raise ValueError(f"eps must lie in (0, 1/C) = (0, {1.0 / num_classes}), got {eps}")
    p = np.full(num_classes, float(eps))
    p[c] = 1.0 - (num_classes - 1) * eps
    return p


def jeffreys_one_hot_decomposition(q, c: int) -> tuple[float, float]:
    """The two one-hot simplified directed terms ``(-ln q_c, q_c ln q_c)``.

    The first is D(P, Q) for an exact one-hot P; the second is D(Q, P) with
    every false-class term dropped. Their sum is the adaptive loss value. The
    full D(Q, P_eps) does not converge to the second term: the dropped terms
    q_i ln(q_i / eps) grow without bound as eps -> 0.
    """
    q = _prob_vector(q, "q")
    c = _class_index(c, q.shape[0])
    qc = float(q[c])
    if qc == 0.0:
        raise ValueError("q_c = 0: -ln q_c is infinite")
    lq = math.log(qc)
    return -lq, qc * lq
