"""Central finite-difference checks for the analytic loss gradients.

The difference quotient is evaluated in ``np.longdouble``. In float64 the
round-off of ``(f(z+h) - f(z-h)) / 2h`` at h = 1e-6 is about 5e-10, which is
a relative error above 1e-5 for the smallest softmax components at C = 100.
Extended precision removes that floor without changing the step size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .losses import LOSS_NAMES, _loss_grads, loss_values
from .numeric import Rng

STEP = 1e-6
RTOL = 1e-5
ATOL = 1e-8
# below this magnitude a component is judged by ATOL instead of RTOL
SMALL = 1e-6


def central_difference(name: str, logits: np.ndarray, label: int, h: float = STEP) -> np.ndarray:
    """Numerical d loss / d logits for one sample, one coordinate per row."""
    z = np.asarray(logits, dtype=np.longdouble)
    C = z.shape[0]
    step = np.eye(C, dtype=np.longdouble) * np.longdouble(h)
    plus = loss_values(name, z[None, :] + step, label)
    minus = loss_values(name, z[None, :] - step, label)
    return ((plus - minus) / (2 * np.longdouble(h))).astype(np.float64)


def compare(analytic: np.ndarray, numeric: np.ndarray, rtol: float = RTOL,
            atol: float = ATOL, small: float = SMALL) -> tuple[bool, float, float]:
    """Mixed relative/absolute comparison.

    Returns ``(ok, max_rel_err, max_abs_err_on_small)``.
    """
    diff = np.abs(analytic - numeric)
    big = np.abs(numeric) >= small
    rel = diff[big] / np.abs(numeric[big])
    max_rel = float(rel.max()) if rel.size else 0.0
    max_abs = float(diff[~big].max()) if np.any(~big) else 0.0
    return bool(max_rel <= rtol and max_abs <= atol), max_rel, max_abs


@dataclass
class GradcheckResult:
    num_classes: int
    samples: int
    max_rel_err: dict[str, float] = field(default_factory=dict)
    max_abs_err: dict[str, float] = field(default_factory=dict)
    failures: dict[str, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v == 0 for v in self.failures.values())


def run_gradcheck(num_classes: int, samples: int, seed: int = 0, h: float = STEP,
                  rtol: float = RTOL, atol: float = ATOL, corrupt: bool = False,
                  low: float = -4.0, high: float = 4.0) -> GradcheckResult:
    """Compare analytic and numerical gradients of both losses.

    Logits are uniform in [low, high); labels uniform over the classes.
    ``corrupt`` perturbs the analytic gradient so callers can confirm the
    harness actually fails.
    """
    if num_classes < 2:
        raise ValueError("gradcheck needs at least 2 classes")
    if samples < 1:
        raise ValueError("gradcheck needs at least 1 sample")
    rng = Rng(seed)
    logits = rng.uniform(low, high, size=(samples, num_classes))
    labels = rng.integers(0, num_classes, size=samples)

    result = GradcheckResult(num_classes, samples)
    for name in LOSS_NAMES:
        _, analytic = _loss_grads(name, logits, labels)
        if corrupt:
            analytic = analytic * (1 + 1e-3)
        worst_rel = worst_abs = 0.0
        failures = 0
        for i in range(samples):
            numeric = central_difference(name, logits[i], int(labels[i]), h)
            ok, rel, ab = compare(analytic[i], numeric, rtol, atol)
            failures += not ok
            worst_rel = max(worst_rel, rel)
            worst_abs = max(worst_abs, ab)
        result.max_rel_err[name] = worst_rel
        result.max_abs_err[name] = worst_abs
        result.failures[name] = failures
    return result
