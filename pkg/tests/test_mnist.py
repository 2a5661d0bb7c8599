import gzip
import struct

import numpy as np
import pytest

from src.data.mnist import (Dataset, DatasetError, find_mnist, load_mnist, parse_idx_images, parse_idx_labels,
                            synthetic_dataset)


def _images(count=2, rows=2, cols=3, magic=0x803):
    pixels = bytes(range(count * rows * cols))
    return struct.pack(">IIII", magic, count, rows, cols) + pixels


def _labels(digits=(7, 1), magic=0x801):
    return struct.pack(">II", magic, len(digits)) + bytes(digits)


def test_parse_images_scales_to_unit_interval():
    images = parse_idx_images(_images())
    assert images.shape == (2, 6)
    assert images[1, 5] == pytest.approx(11 / 255)
    assert images.min() == 0.0


def test_parse_labels_one_hot():
    labels = parse_idx_labels(_labels())
    assert labels.shape == (2, 10)
    assert labels[0, 7] == 1.0 and labels.sum() == 2.0


def test_bad_magic():
    with pytest.raises(DatasetError, match="bad magic"):
        parse_idx_images(_images(magic=0x801))
    with pytest.raises(DatasetError, match="bad magic"):
        parse_idx_labels(_labels(magic=0x803))


def test_truncated_payloads():
    with pytest.raises(DatasetError, match="pixel bytes"):
        parse_idx_images(_images()[:-1])
    with pytest.raises(DatasetError, match="truncated header"):
        parse_idx_labels(b"\x00\x00\x08")


def test_label_out_of_range():
    with pytest.raises(DatasetError, match="out of range"):
        parse_idx_labels(_labels((3, 12)))


def test_load_mnist_reads_gzip_and_checks_counts(tmp_path):
    images, labels = tmp_path / "img.gz", tmp_path / "lbl"
    with gzip.open(images, "wb") as f:
        f.write(_images())
    labels.write_bytes(_labels())
    data = load_mnist(str(images), str(labels))
    assert len(data) == 2
    assert len(load_mnist(str(images), str(labels), limit=1)) == 1

    labels.write_bytes(_labels((1, 2, 3)))
    with pytest.raises(DatasetError, match="3 labels"):
        load_mnist(str(images), str(labels))


def test_dataset_sampling_wraps_and_splits():
    data = synthetic_dataset(5, features=4, classes=3, seed=1)
    x, y = data.sample(7)
    assert np.array_equal(x, data.images[2]) and np.array_equal(y, data.labels[2])
    train, test = data.split(3)
    assert (len(train), len(test)) == (3, 2)
    with pytest.raises(DatasetError):
        Dataset(np.zeros((2, 4)), np.zeros((3, 3)))


def test_synthetic_dataset_is_seeded():
    a = synthetic_dataset(20, features=8, classes=4, seed=9)
    b = synthetic_dataset(20, features=8, classes=4, seed=9)
    c = synthetic_dataset(20, features=8, classes=4, seed=10)
    assert np.array_equal(a.images, b.images) and np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.images, c.images)
    assert a.images.min() >= 0.0 and a.images.max() <= 1.0
    assert np.all(a.labels.sum(axis=1) == 1.0)


def test_small_separation_overlaps_classes():
    wide = synthetic_dataset(400, features=50, classes=4, seed=2)
    narrow = synthetic_dataset(400, features=50, classes=4, seed=2, separation=0.1)

    def centre_gap(data):
        digits = data.labels.argmax(axis=1)
        means = np.array([data.images[digits == k].mean(axis=0) for k in range(4)])
        return np.abs(means[:, None, :] - means[None, :, :]).mean()

    assert centre_gap(narrow) < 0.25 * centre_gap(wide)
    assert np.abs(narrow.images.mean() - 0.5) < 0.05


def test_label_noise_relabels_a_share_of_samples():
    clean = synthetic_dataset(2000, features=4, classes=10, seed=5)
    noisy = synthetic_dataset(2000, features=4, classes=10, seed=5, label_noise=0.2)
    assert np.array_equal(clean.images, noisy.images)
    changed = np.mean(clean.labels.argmax(axis=1) != noisy.labels.argmax(axis=1))
    assert 0.12 < changed < 0.24
    assert np.all(noisy.labels.sum(axis=1) == 1.0)
    with pytest.raises(DatasetError):
        synthetic_dataset(4, label_noise=1.5)


def test_find_mnist(tmp_path):
    assert find_mnist(str(tmp_path)) is None
    assert find_mnist(None) is None
    (tmp_path / "train-images-idx3-ubyte.gz").write_bytes(b"")
    assert find_mnist(str(tmp_path)) is None
    (tmp_path / "train-labels-idx1-ubyte").write_bytes(b"")
    assert find_mnist(str(tmp_path)) == (str(tmp_path / "train-images-idx3-ubyte.gz"),
                                         str(tmp_path / "train-labels-idx1-ubyte"))
