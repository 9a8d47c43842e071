"""Top-k error and multi-trial aggregation over a terminal epoch window."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# tolerance for the top5_err <= top1_err check on stored (rounded) records
_ORDER_SLACK = 1e-12


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    test_top1_acc: float
    test_top5_err: float

    def __post_init__(self):
        for name in ("test_top1_acc", "test_top5_err"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.test_top5_err > 1.0 - self.test_top1_acc + _ORDER_SLACK:
            raise ValueError("top-5 error cannot exceed top-1 error")


@dataclass
class TrialReport:
    seed: int
    loss_name: str
    trial: int = 0
    records: list[EpochRecord] = field(default_factory=list)
    # sha256 prefixes of the epoch-0 batch order and the initial parameters
    order_checksum: str = ""
    init_checksum: str = ""

    def __post_init__(self):
        for i, r in enumerate(self.records):
            if r.epoch != i:
                raise ValueError(f"records must be dense from epoch 0; got {r.epoch} at position {i}")

    @property
    def epochs(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float
    per_trial: list[float]


def top_k_error(logits, labels, k: int) -> float:
    """Fraction of rows whose label is not among the k largest logits.

    Ties rank the lower class index first: the label's rank is the number of
    classes with a strictly larger logit plus the number of lower-indexed
    classes with an equal one.
    """
    z = np.asarray(logits)
    y = np.asarray(labels)
    if z.ndim != 2:
        raise ValueError("logits must be a 2-D (n, C) array")
    n, C = z.shape
    if y.shape != (n,):
        raise ValueError(f"{n} logit rows but labels have shape {y.shape}")
    if not 1 <= k <= C:
        raise ValueError(f"k must lie in [1, {C}], got {k}")
    if n == 0:
        raise ValueError("top_k_error of an empty batch is undefined")
    true = z[np.arange(n), y][:, None]
    lower = np.arange(C)[None, :] < y[:, None]
    rank = (z > true).sum(axis=1) + ((z == true) & lower).sum(axis=1)
    return float(np.mean(rank >= k))


def accuracy(logits, labels) -> float:
    return 1.0 - top_k_error(logits, labels, 1)


def mean_and_sample_std(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("sample standard deviation needs at least 2 values")
    return float(v.mean()), float(v.std(ddof=1))


def default_window(epochs: int, width: int = 10) -> tuple[int, int]:
    """The last ``width`` epochs, e.g. (190, 200) for a 200-epoch run."""
    return max(0, epochs - width), epochs


def aggregate_trials(reports: list[TrialReport], window: tuple[int, int] | None = None,
                     metric: str = "test_top5_err") -> Aggregate:
    """Mean and sample std (n - 1) across trials of each trial's window mean.

    ``window`` is a half-open epoch range; the default is the last 10 epochs.
    """
    if len(reports) < 2:
        raise ValueError("aggregation needs at least 2 trials (sample std is undefined)")
    epochs = reports[0].epochs
    if any(r.epochs != epochs for r in reports):
        raise ValueError("all trials must have the same number of epochs")
    start, stop = window if window is not None else default_window(epochs)
    if not 0 <= start < stop <= epochs:
        raise ValueError(f"window [{start}, {stop}) is outside epochs [0, {epochs})")
    per_trial = [
        math.fsum(getattr(rec, metric) for rec in r.records[start:stop]) / (stop - start)
        for r in reports
    ]
    mean, std = mean_and_sample_std(per_trial)
    return Aggregate(mean, std, per_trial)
