"""Datasets: the CIFAR-100 binary format, synthetic blobs, preprocessing.

Preprocessing order for image data is parse -> scale to [0, 1] -> augment
(training batches only) -> subtract the training mean image. The mean is
computed once from the un-augmented training images.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .numeric import Rng

IMAGE_SIDE = 32
IMAGE_CHANNELS = 3
IMAGE_FEATURES = IMAGE_CHANNELS * IMAGE_SIDE * IMAGE_SIDE
RECORD_BYTES = 2 + IMAGE_FEATURES
CIFAR100_CLASSES = 100
CROP_PAD = 4

KINDS = ("image", "flat")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    kind: str = "flat"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D (n, d) array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape} labels"
            )
        if self.num_classes < 2:
            raise ValueError("a dataset needs at least 2 classes")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes - 1}]")
        if self.kind == "image" and self.features.shape[1] != IMAGE_FEATURES:
            raise ValueError(f"image datasets need {IMAGE_FEATURES} features per row")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


# -- CIFAR-100 binary format ---------------------------------------------------


def parse_cifar100_records(data: bytes) -> Dataset:
    """Parse a stream of 3074-byte records.

    Each record is ``[coarse u8][fine u8][R 1024][G 1024][B 1024]`` with each
    plane row-major. The fine label is the class; coarse labels are dropped.
    Pixels are scaled to [0, 1].
    """
    buf = np.frombuffer(data, dtype=np.uint8)
    if buf.size % RECORD_BYTES:
        offset = (buf.size // RECORD_BYTES) * RECORD_BYTES
        raise ValueError(
            f"truncated CIFAR-100 record at byte offset {offset}: "
            f"{buf.size - offset} of {RECORD_BYTES} bytes present"
        )
    records = buf.reshape(-1, RECORD_BYTES)
    fine = records[:, 1].astype(np.int64)
    bad = np.flatnonzero(fine >= CIFAR100_CLASSES)
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"fine label {fine[i]} >= {CIFAR100_CLASSES} in record {i} "
            f"(byte offset {i * RECORD_BYTES + 1})"
        )
    features = records[:, 2:].astype(np.float64) / 255.0
    return Dataset(features, fine, CIFAR100_CLASSES, "image")


def parse_cifar100(train_bytes: bytes, test_bytes: bytes) -> tuple[Dataset, Dataset]:
    return parse_cifar100_records(train_bytes), parse_cifar100_records(test_bytes)


def load_cifar100(train_path: str | Path, test_path: str | Path) -> tuple[Dataset, Dataset]:
    return parse_cifar100(Path(train_path).read_bytes(), Path(test_path).read_bytes())


def encode_cifar100(fine: np.ndarray, pixels: np.ndarray, coarse: np.ndarray | None = None) -> bytes:
    """Serialise labels and uint8 pixel rows (n, 3072) to the binary format."""
    fine = np.asarray(fine, dtype=np.uint8)
    pixels = np.asarray(pixels, dtype=np.uint8)
    n = fine.shape[0]
    if pixels.shape != (n, IMAGE_FEATURES):
        raise ValueError(f"pixels must have shape ({n}, {IMAGE_FEATURES})")
    coarse = np.zeros(n, np.uint8) if coarse is None else np.asarray(coarse, dtype=np.uint8)
    out = np.empty((n, RECORD_BYTES), dtype=np.uint8)
    out[:, 0] = coarse
    out[:, 1] = fine
    out[:, 2:] = pixels
    return out.tobytes()


# -- synthetic blobs -----------------------------------------------------------

MAX_CENTER_ATTEMPTS = 10_000


def blob_centers(rng: Rng, num_classes: int, dim: int, spread: float) -> np.ndarray:
    """Centers uniform in [-1, 1]^dim, pairwise at least 4 * spread apart."""
    if num_classes < 2 or dim < 1:
        raise ValueError("need num_classes >= 2 and dim >= 1")
    if not spread > 0:
        raise ValueError(f"spread must be positive, got {spread}")
    min_dist = 4.0 * spread
    centers: list[np.ndarray] = []
    attempts = 0
    while len(centers) < num_classes:
        if attempts >= MAX_CENTER_ATTEMPTS:
            raise ValueError(
                f"could not place {num_classes} centers {min_dist:g} apart in "
                f"{MAX_CENTER_ATTEMPTS} attempts; use a smaller spread"
            )
        attempts += 1
        cand = rng.uniform(-1.0, 1.0, size=dim)
        if all(np.linalg.norm(cand - c) >= min_dist for c in centers):
            centers.append(cand)
    return np.array(centers)


def sample_blobs(rng: Rng, centers: np.ndarray, per_class: int, spread: float) -> Dataset:
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    C, dim = centers.shape
    noise = rng.normal(0.0, spread, size=(C, per_class, dim))
    features = (centers[:, None, :] + noise).reshape(C * per_class, dim)
    labels = np.repeat(np.arange(C), per_class)
    return Dataset(features, labels, C, "flat")


def synthetic_blobs(rng: Rng, num_classes: int, per_class: int, dim: int, spread: float) -> Dataset:
    """Gaussian blobs around well-separated random centers, grouped by class."""
    centers = blob_centers(rng, num_classes, dim, spread)
    return sample_blobs(rng, centers, per_class, spread)


def synthetic_blob_splits(rng: Rng, num_classes: int, per_class: int, dim: int,
                          spread: float, test_per_class: int) -> tuple[Dataset, Dataset]:
    """Train and test sets drawn around the same centers."""
    centers = blob_centers(rng, num_classes, dim, spread)
    train = sample_blobs(rng, centers, per_class, spread)
    test = sample_blobs(rng, centers, test_per_class, spread)
    return train, test


# -- mean subtraction ----------------------------------------------------------


@dataclass(frozen=True)
class MeanImage:
    values: np.ndarray


def compute_mean(train: Dataset) -> MeanImage:
    if len(train) == 0:
        raise ValueError("cannot compute the mean of an empty dataset")
    return MeanImage(train.features.mean(axis=0))


def subtract_mean(ds: Dataset, mean: MeanImage) -> Dataset:
    if mean.values.shape != (ds.dim,):
        raise ValueError(
            f"mean has {mean.values.shape[0]} features, dataset has {ds.dim}"
        )
    return Dataset(ds.features - mean.values, ds.labels, ds.num_classes, ds.kind)


# -- augmentation --------------------------------------------------------------


def flip_and_crop(images: np.ndarray, flip: np.ndarray, top: np.ndarray, left: np.ndarray) -> np.ndarray:
    """Optionally mirror each image, then crop a 32x32 window from its
    zero-padded (40x40) version at (top, left).

    ``images`` has shape (n, 3072) in channel-major layout. An offset of
    (4, 4) is the centered, identity crop.
    """
    n = images.shape[0]
    x = images.reshape(n, IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE)
    x = np.where(np.asarray(flip, bool)[:, None, None, None], x[..., ::-1], x)
    p = CROP_PAD
    padded = np.zeros((n, IMAGE_CHANNELS, IMAGE_SIDE + 2 * p, IMAGE_SIDE + 2 * p), x.dtype)
    padded[:, :, p:p + IMAGE_SIDE, p:p + IMAGE_SIDE] = x
    rows = np.asarray(top)[:, None] + np.arange(IMAGE_SIDE)
    cols = np.asarray(left)[:, None] + np.arange(IMAGE_SIDE)
    idx = np.arange(n)[:, None, None, None]
    ch = np.arange(IMAGE_CHANNELS)[None, :, None, None]
    out = padded[idx, ch, rows[:, None, :, None], cols[:, None, None, :]]
    return out.reshape(n, IMAGE_FEATURES)


def augment_batch(images: np.ndarray, rng: Rng) -> np.ndarray:
    """Random horizontal flip (p = 0.5) then random pad-4 crop, per image."""
    images = np.asarray(images)
    if images.ndim != 2 or images.shape[1] != IMAGE_FEATURES:
        raise ValueError(f"augmentation needs (n, {IMAGE_FEATURES}) image rows")
    n = images.shape[0]
    flip = rng.uniform(0.0, 1.0, size=n) < 0.5
    top = rng.integers(0, 2 * CROP_PAD + 1, size=n)
    left = rng.integers(0, 2 * CROP_PAD + 1, size=n)
    return flip_and_crop(images, flip, top, left)


def augment(row: np.ndarray, rng: Rng, kind: str = "image") -> np.ndarray:
    """Augment a single image row."""
    if kind != "image":
        raise ValueError(f"augmentation applies to image data only, got kind {kind!r}")
    return augment_batch(np.asarray(row)[None, :], rng)[0]


# -- batching ------------------------------------------------------------------


@dataclass(frozen=True)
class Batch:
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray


def batches(ds: Dataset, batch_size: int, rng: Rng) -> Iterator[Batch]:
    """One epoch: a seeded shuffle cut into consecutive batches (last may be short)."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if len(ds) == 0:
        raise ValueError("cannot batch an empty dataset")
    order = rng.permutation(len(ds))
    return (
        Batch(idx, ds.features[idx], ds.labels[idx])
        for idx in (order[s:s + batch_size] for s in range(0, len(ds), batch_size))
    )
