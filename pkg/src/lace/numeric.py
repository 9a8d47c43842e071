"""Dense matrix helpers and the seedable random number generator.

Matrices are plain 2-D numpy arrays (row-major, float64 unless the caller
explicitly passes an extended-precision array). ``Rng`` wraps numpy's PCG64
bit generator seeded through ``SeedSequence``; child generators use the
sequence's spawn key, so the streams for ``(seed, 0)`` and ``(seed, 1)`` are
disjoint by construction.
"""

from __future__ import annotations

import numpy as np

U64_MAX = 2**64 - 1


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Return ``x`` as a finite 2-D floating array.

    Floating dtypes are preserved (so ``np.longdouble`` survives); anything
    else is converted to float64.
    """
    arr = np.asarray(x)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    check_finite(arr, name)
    return arr


def check_finite(arr: np.ndarray, name: str = "array") -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"cannot multiply matrices of shape {a.shape[0]}x{a.shape[1]} "
            f"and {b.shape[0]}x{b.shape[1]}"
        )
    out = a @ b
    check_finite(out, "matmul result")
    return out


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.float64)


class Rng:
    """Deterministic generator identified by a u64 seed and a spawn path.

    >>> Rng(7).uniform(0.0, 1.0) == Rng(7).uniform(0.0, 1.0)
    True
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed <= U64_MAX:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, path={self.path})"

    def child(self, index: int) -> Rng:
        """Independent generator for sub-task ``index`` (e.g. one trial)."""
        if index < 0:
            raise ValueError("child index must be non-negative")
        return Rng(self.seed, self.path + (index,))

    def uniform(self, lo: float, hi: float, size=None):
        """Draw from [lo, hi)."""
        if not lo < hi:
            raise ValueError(f"uniform requires lo < hi, got lo={lo}, hi={hi}")
        u = lo + (hi - lo) * self._gen.random(size)
        # lo + (hi-lo)*u can round up to hi
        top = np.nextafter(hi, lo)
        if size is None:
            return float(min(u, top))
        return np.minimum(u, top)

    def normal(self, mean: float, std: float, size=None):
        if not std > 0:
            raise ValueError(f"normal requires std > 0, got {std}")
        out = self._gen.normal(mean, std, size)
        return float(out) if size is None else out

    def integers(self, lo: int, hi: int, size=None):
        """Integers in [lo, hi)."""
        out = self._gen.integers(lo, hi, size=size)
        return int(out) if size is None else out

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)
