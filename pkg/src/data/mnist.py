"""MNIST IDX ingestion and a seeded synthetic stand-in."""
import gzip
import logging
import os
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
NUM_CLASSES = 10


class DatasetError(ValueError):
    """Raised for malformed or inconsistent dataset files."""


@dataclass
class Dataset:
    images: np.ndarray  # (count, features), values in [0, 1]
    labels: np.ndarray  # (count, classes), one-hot

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DatasetError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.images)

    def sample(self, index):
        index %= len(self)
        return self.images[index], self.labels[index]

    def head(self, count):
        return Dataset(self.images[:count], self.labels[:count])

    def split(self, count):
        return self.head(count), Dataset(self.images[count:], self.labels[count:])


def _read(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def _header(raw, magic, dims, path):
    need = 4 * (1 + dims)
    if len(raw) < need:
        raise DatasetError(f"{path}: truncated header")
    values = np.frombuffer(raw, dtype=">u4", count=1 + dims)
    if int(values[0]) != magic:
        raise DatasetError(f"{path}: bad magic 0x{int(values[0]):08x}, expected 0x{magic:08x}")
    return [int(v) for v in values[1:]], need


def parse_idx_images(raw, path="<images>"):
    (count, rows, cols), offset = _header(raw, IMAGES_MAGIC, 3, path)
    size = count * rows * cols
    if len(raw) - offset < size:
        raise DatasetError(f"{path}: expected {size} pixel bytes, found {len(raw) - offset}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=size, offset=offset)
    return pixels.reshape(count, rows * cols).astype(float) / 255.0


def parse_idx_labels(raw, path="<labels>"):
    (count,), offset = _header(raw, LABELS_MAGIC, 1, path)
    if len(raw) - offset < count:
        raise DatasetError(f"{path}: expected {count} labels, found {len(raw) - offset}")
    digits = np.frombuffer(raw, dtype=np.uint8, count=count, offset=offset)
    if digits.size and int(digits.max()) >= NUM_CLASSES:
        raise DatasetError(f"{path}: label {int(digits.max())} out of range")
    return np.eye(NUM_CLASSES)[digits]


def load_mnist(images_path, labels_path, limit=None):
    images = parse_idx_images(_read(images_path), images_path)
    labels = parse_idx_labels(_read(labels_path), labels_path)
    if len(images) != len(labels):
        raise DatasetError(f"{images_path} has {len(images)} images but {labels_path} has {len(labels)} labels")
    data = Dataset(images, labels)
    if limit:
        data = data.head(limit)
    logger.info(f"Loaded {len(data)} samples from {images_path}")
    return data


def synthetic_dataset(count, features=784, classes=NUM_CLASSES, seed=0, spread=0.15, separation=1.0,
                      label_noise=0.0):
    """Gaussian clusters around per-class centres, clipped to [0, 1].

    Centres are drawn in a band of width `separation` around 0.5, so small
    separations give overlapping classes. `label_noise` relabels that share
    of samples with a uniformly drawn class.
    """
    if not 0.0 <= label_noise <= 1.0:
        raise DatasetError(f"label noise must be in [0, 1], got {label_noise}")
    rng = np.random.default_rng(seed)
    centres = 0.5 + separation * (rng.uniform(0.0, 1.0, size=(classes, features)) - 0.5)
    digits = rng.integers(0, classes, size=count)
    images = np.clip(centres[digits] + rng.normal(0.0, spread, size=(count, features)), 0.0, 1.0)
    if label_noise > 0:
        flipped = rng.random(count) < label_noise
        digits = np.where(flipped, rng.integers(0, classes, size=count), digits)
    logger.debug(f"Generated {count} synthetic samples (seed {seed})")
    return Dataset(images, np.eye(classes)[digits])


def find_mnist(directory):
    """(images, labels) paths of the MNIST training set in `directory`, or None."""
    if not directory:
        return None
    found = []
    for stem in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
        path = next((p for p in (os.path.join(directory, stem), os.path.join(directory, stem + ".gz"))
                     if os.path.isfile(p)), None)
        if path is None:
            return None
        found.append(path)
    return tuple(found)
