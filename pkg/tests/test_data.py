import numpy as np
import pytest

from lace.data import (
    IMAGE_FEATURES,
    RECORD_BYTES,
    Dataset,
    augment,
    augment_batch,
    batches,
    compute_mean,
    encode_cifar100,
    flip_and_crop,
    parse_cifar100,
    parse_cifar100_records,
    subtract_mean,
    synthetic_blob_splits,
    synthetic_blobs,
)
from lace.numeric import Rng


def image(fill=None):
    img = np.zeros((3, 32, 32))
    if fill:
        for (ch, r, c), v in fill.items():
            img[ch, r, c] = v
    return img.reshape(-1)


# -- parser --------------------------------------------------------------------


def test_one_record_fixture():
    rec = bytes([3, 7]) + bytes([255]) * IMAGE_FEATURES
    ds = parse_cifar100_records(rec)
    assert len(ds) == 1 and ds.labels.tolist() == [7]
    assert ds.num_classes == 100 and ds.kind == "image"
    assert np.all(ds.features == 1.0)


def test_plane_layout():
    pixels = np.zeros((1, IMAGE_FEATURES), np.uint8)
    pixels[0, 0] = 10  # R, row 0, col 0
    pixels[0, 1024 + 32 * 2 + 5] = 20  # G, row 2, col 5
    pixels[0, 2048 + 1023] = 30  # B, row 31, col 31
    ds = parse_cifar100_records(encode_cifar100([1], pixels))
    img = ds.features[0].reshape(3, 32, 32) * 255
    assert img[0, 0, 0] == pytest.approx(10)
    assert img[1, 2, 5] == pytest.approx(20)
    assert img[2, 31, 31] == pytest.approx(30)


def test_truncated_stream():
    with pytest.raises(ValueError, match="offset 0"):
        parse_cifar100_records(bytes(RECORD_BYTES - 1))
    with pytest.raises(ValueError, match=f"offset {RECORD_BYTES}"):
        parse_cifar100_records(bytes(RECORD_BYTES + 5))


def test_bad_fine_label():
    good = bytes([0, 99]) + bytes(IMAGE_FEATURES)
    bad = bytes([0, 100]) + bytes(IMAGE_FEATURES)
    with pytest.raises(ValueError, match="record 1"):
        parse_cifar100_records(good + bad)


def test_round_trip():
    rng = Rng(0)
    n = 20
    pixels = rng.integers(0, 256, size=(n, IMAGE_FEATURES)).astype(np.uint8)
    fine = rng.integers(0, 100, size=n)
    coarse = rng.integers(0, 20, size=n)
    raw = encode_cifar100(fine, pixels, coarse)
    assert len(raw) == n * RECORD_BYTES
    train, test = parse_cifar100(raw, raw[: 5 * RECORD_BYTES])
    assert train.labels.tolist() == fine.tolist()
    assert len(test) == 5
    np.testing.assert_array_equal(np.rint(train.features * 255).astype(np.uint8), pixels)
    assert encode_cifar100(train.labels, np.rint(train.features * 255), coarse) == raw


# -- blobs ---------------------------------------------------------------------


def test_blobs_nearest_center():
    rng = Rng(1)
    ds = synthetic_blobs(rng, 5, 50, 3, 1e-4)
    centers = np.array([ds.features[ds.labels == k].mean(axis=0) for k in range(5)])
    d = np.linalg.norm(ds.features[:, None, :] - centers[None], axis=2)
    assert np.all(d.argmin(axis=1) == ds.labels)


def test_blobs_determinism_and_shape():
    a = synthetic_blobs(Rng(2), 4, 10, 6, 0.2)
    b = synthetic_blobs(Rng(2), 4, 10, 6, 0.2)
    assert a.features.shape == (40, 6)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_blobs_separation_failure():
    with pytest.raises(ValueError, match="smaller spread"):
        synthetic_blobs(Rng(3), 10, 5, 2, 2.0)


def test_blob_splits_share_centers():
    train, test = synthetic_blob_splits(Rng(4), 3, 200, 4, 0.05, 50)
    for k in range(3):
        np.testing.assert_allclose(train.features[train.labels == k].mean(axis=0),
                                   test.features[test.labels == k].mean(axis=0), atol=0.05)


# -- mean subtraction -------------------------------------------------------------


def test_constant_dataset_mean():
    ds = Dataset(np.full((4, 3), 0.7), np.zeros(4, int), 2)
    assert np.all(subtract_mean(ds, compute_mean(ds)).features == 0)


def test_mean_uses_train_statistics():
    rng = Rng(5)
    train = Dataset(rng.uniform(0, 1, size=(50, 8)), np.zeros(50, int), 2)
    test = Dataset(rng.uniform(2, 3, size=(10, 8)), np.zeros(10, int), 2)
    mean = compute_mean(train)
    assert np.all(np.abs(subtract_mean(train, mean).features.mean(axis=0)) <= 1e-9)
    np.testing.assert_allclose(subtract_mean(test, mean).features, test.features - train.features.mean(axis=0))
    with pytest.raises(ValueError):
        subtract_mean(Dataset(np.zeros((2, 5)), np.zeros(2, int), 2), mean)


# -- augmentation ------------------------------------------------------------------


def test_identity_crop():
    x = Rng(6).uniform(0, 1, size=(2, IMAGE_FEATURES))
    out = flip_and_crop(x, np.array([False, False]), np.array([4, 4]), np.array([4, 4]))
    np.testing.assert_array_equal(out, x)


def test_double_flip_is_identity():
    x = Rng(7).uniform(0, 1, size=(3, IMAGE_FEATURES))
    once = flip_and_crop(x, np.ones(3, bool), np.full(3, 4), np.full(3, 4))
    twice = flip_and_crop(once, np.ones(3, bool), np.full(3, 4), np.full(3, 4))
    np.testing.assert_array_equal(twice, x)
    assert not np.array_equal(once, x)
    np.testing.assert_array_equal(once.reshape(3, 3, 32, 32), x.reshape(3, 3, 32, 32)[..., ::-1])


def test_corner_crop_shifts_content():
    # crop at (0, 0) of the 40x40 padded image: pixel (r, c) moves to (r+4, c+4)
    x = image({(1, 10, 20): 1.0})[None]
    out = flip_and_crop(x, np.array([False]), np.array([0]), np.array([0])).reshape(3, 32, 32)
    assert out[1, 14, 24] == 1.0
    assert out.sum() == 1.0
    assert np.all(out[:, :4, :] == 0) and np.all(out[:, :, :4] == 0)
    # a pixel near the far edge is pushed out of the window
    y = image({(0, 30, 30): 1.0})[None]
    assert flip_and_crop(y, np.array([False]), np.array([0]), np.array([0])).sum() == 0


def test_augment_range_and_shape():
    x = Rng(8).uniform(0, 1, size=(16, IMAGE_FEATURES))
    out = augment_batch(x, Rng(9))
    assert out.shape == x.shape
    assert out.min() >= 0 and out.max() <= 1
    assert augment(x[0], Rng(9)).shape == (IMAGE_FEATURES,)
    np.testing.assert_array_equal(augment_batch(x, Rng(9)), out)


def test_augment_rejects_flat():
    with pytest.raises(ValueError):
        augment(np.zeros(10), Rng(0), kind="flat")
    with pytest.raises(ValueError):
        augment_batch(np.zeros((2, 10)), Rng(0))


# -- batching ------------------------------------------------------------------------


def flat(n):
    return Dataset(np.arange(n, dtype=float)[:, None], np.zeros(n, int), 2)


def test_batch_sizes_and_permutation():
    ds = flat(250)
    bs = list(batches(ds, 100, Rng(10)))
    assert [len(b.indices) for b in bs] == [100, 100, 50]
    idx = np.concatenate([b.indices for b in bs])
    assert sorted(idx.tolist()) == list(range(250))
    np.testing.assert_array_equal(np.concatenate([b.features[:, 0] for b in bs]), idx)


def test_batches_every_epoch_is_permutation():
    rng = Rng(11)
    orders = []
    for _ in range(3):
        idx = np.concatenate([b.indices for b in batches(flat(37), 8, rng)])
        assert sorted(idx.tolist()) == list(range(37))
        orders.append(idx.tolist())
    assert orders[0] != orders[1]


def test_batches_determinism_and_errors():
    a = [b.indices.tolist() for b in batches(flat(30), 7, Rng(12))]
    b = [b.indices.tolist() for b in batches(flat(30), 7, Rng(12))]
    assert a == b
    with pytest.raises(ValueError):
        batches(Dataset(np.zeros((0, 1)), np.zeros(0, int), 2), 10, Rng(0))
    with pytest.raises(ValueError):
        batches(flat(3), 0, Rng(0))


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.array([0, 1, 2]), 2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.array([0, 1]), 2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((1, 5)), np.array([0]), 2, "image")
