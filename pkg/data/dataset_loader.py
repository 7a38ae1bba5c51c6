"""
MNIST (IDX) and CIFAR-10 (binary) loaders plus deterministic sampling
"""

import logging
import struct
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from config.constants import (
    CIFAR_IMAGE_SIZE,
    CIFAR_RECORD_SIZE,
    DatasetSource,
    DatasetSplit,
    IDX_IMAGE_HEADER_SIZE,
    IDX_IMAGE_MAGIC,
    IDX_LABEL_HEADER_SIZE,
    IDX_LABEL_MAGIC,
    NUM_CLASSES,
    SAMPLE_RATIOS,
)
from config.settings import Settings
from data.models import Dataset
from utils.exceptions import DatasetFormatError, DatasetNotFoundError, InvalidConfigError

logger = logging.getLogger(__name__)


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise DatasetNotFoundError(f"Dataset file not found: {path}")
    return path.read_bytes()


def _check_labels(labels: np.ndarray, origin: str):
    if len(labels) and labels.max() >= NUM_CLASSES:
        bad = int(np.argmax(labels >= NUM_CLASSES))
        raise DatasetFormatError(
            f"{origin}: label {int(labels[bad])} at record {bad} is outside [0, {NUM_CLASSES})"
        )


def load_idx(images_path, labels_path, split: DatasetSplit = DatasetSplit.TRAIN) -> Dataset:
    """
    Load an MNIST-style IDX image/label file pair (uncompressed)

    Args:
        images_path: idx3-ubyte image file (magic 0x00000803)
        labels_path: idx1-ubyte label file (magic 0x00000801)
        split: Which split the files hold

    Returns:
        Dataset of shape (N, rows, cols, 1)

    Raises:
        DatasetNotFoundError: If a file is missing
        DatasetFormatError: Bad magic, truncated data, or count mismatch
    """
    image_bytes = _read_bytes(images_path)
    label_bytes = _read_bytes(labels_path)

    if len(image_bytes) < IDX_IMAGE_HEADER_SIZE:
        raise DatasetFormatError(f"{images_path}: truncated IDX header")
    magic, count, rows, cols = struct.unpack_from(">IIII", image_bytes, 0)
    if magic != IDX_IMAGE_MAGIC:
        raise DatasetFormatError(
            f"{images_path}: bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
        )
    expected = IDX_IMAGE_HEADER_SIZE + count * rows * cols
    if len(image_bytes) < expected:
        raise DatasetFormatError(
            f"{images_path}: truncated file ({len(image_bytes)} bytes, expected {expected})"
        )

    if len(label_bytes) < IDX_LABEL_HEADER_SIZE:
        raise DatasetFormatError(f"{labels_path}: truncated IDX header")
    label_magic, label_count = struct.unpack_from(">II", label_bytes, 0)
    if label_magic != IDX_LABEL_MAGIC:
        raise DatasetFormatError(
            f"{labels_path}: bad label magic 0x{label_magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
        )
    if len(label_bytes) < IDX_LABEL_HEADER_SIZE + label_count:
        raise DatasetFormatError(f"{labels_path}: truncated file")
    if label_count != count:
        raise DatasetFormatError(
            f"Count mismatch: {count} images in {images_path}, {label_count} labels in {labels_path}"
        )

    raw = np.frombuffer(image_bytes, dtype=np.uint8, count=count * rows * cols,
                        offset=IDX_IMAGE_HEADER_SIZE).reshape(count, rows, cols, 1).copy()
    labels = np.frombuffer(label_bytes, dtype=np.uint8, count=count,
                           offset=IDX_LABEL_HEADER_SIZE).copy()
    _check_labels(labels, str(labels_path))

    logger.info("loaded %d images from %s", count, images_path)
    return Dataset(raw=raw, labels=labels, source=DatasetSource.MNIST, split=split)


def load_cifar10(batch_paths: Sequence, split: DatasetSplit = DatasetSplit.TRAIN) -> Dataset:
    """
    Load CIFAR-10 binary batch files

    Each record is 1 label byte followed by 3072 pixel bytes, channel-planar
    (1024 red, 1024 green, 1024 blue, each row-major).

    Raises:
        DatasetNotFoundError: If a file is missing
        DatasetFormatError: Length not a multiple of 3073 or a label >= 10
    """
    chunks: List[np.ndarray] = []
    for path in batch_paths:
        data = _read_bytes(path)
        if len(data) % CIFAR_RECORD_SIZE:
            raise DatasetFormatError(
                f"{path}: length {len(data)} is not a multiple of {CIFAR_RECORD_SIZE}"
            )
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD_SIZE)
        _check_labels(records[:, 0], str(path))
        chunks.append(records)

    records = np.concatenate(chunks) if chunks else np.zeros((0, CIFAR_RECORD_SIZE), np.uint8)
    size = CIFAR_IMAGE_SIZE
    labels = records[:, 0].copy()
    raw = records[:, 1:].reshape(-1, 3, size, size).transpose(0, 2, 3, 1).copy()

    logger.info("loaded %d CIFAR-10 records from %d file(s)", len(labels), len(chunks))
    return Dataset(raw=raw, labels=labels, source=DatasetSource.CIFAR10, split=split)


def to_source_bytes(ds: Dataset) -> bytes:
    """
    Re-encode a dataset's pixel bytes in its source file layout

    MNIST gives the IDX pixel body (without header); CIFAR-10 gives the
    channel-planar pixel bytes of each record (without label bytes).
    """
    if ds.source == DatasetSource.CIFAR10:
        return ds.raw.transpose(0, 3, 1, 2).tobytes()
    return ds.raw.tobytes()


def sample_counts(source: DatasetSource, n: int) -> Tuple[int, int]:
    """
    Split n samples into (train, test) parts using the corpus ratio

    mnist 8571:1429 and cifar10 8333:1667 per 10000 samples.
    """
    train_part, test_part = SAMPLE_RATIOS[source]
    train_n = int(round(n * train_part / (train_part + test_part)))
    return train_n, n - train_n


def stratified_sample(ds: Dataset, n: int, seed: int) -> Dataset:
    """
    Label-stratified random subset of n images

    Per-class quotas follow the class proportions of ds (largest remainder
    rounding); positions are drawn without replacement.

    Raises:
        InvalidConfigError: If n is negative or larger than ds
    """
    if n < 0:
        raise InvalidConfigError(f"Sample size must be >= 0, got {n}")
    if n > len(ds):
        raise InvalidConfigError(f"Requested {n} samples but only {len(ds)} available")
    if n == len(ds):
        return ds

    rng = np.random.default_rng(seed)
    classes, counts = np.unique(ds.labels, return_counts=True)
    quotas_exact = counts * n / len(ds)
    quotas = np.floor(quotas_exact).astype(np.int64)
    remainder = n - quotas.sum()
    if remainder:
        # stable order so ties break by class index
        order = np.argsort(-(quotas_exact - quotas), kind='stable')
        quotas[order[:remainder]] += 1

    chosen = []
    for label, quota in zip(classes, quotas):
        members = np.flatnonzero(ds.labels == label)
        chosen.append(rng.choice(members, size=int(quota), replace=False))
    positions = np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, np.int64)
    return ds.subset(positions)


def mirrored_sample(train: Dataset, test: Dataset, n: int, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Sample n images split between train and test by the corpus ratio

    Returns:
        Tuple of (train part, test part)
    """
    train_n, test_n = sample_counts(train.source, n)
    return (
        stratified_sample(train, train_n, seed),
        stratified_sample(test, test_n, seed + 1),
    )


def load_mnist_dir(directory, split: DatasetSplit) -> Dataset:
    """Load an MNIST split from a directory holding the standard file names"""
    directory = Path(directory)
    if split == DatasetSplit.TRAIN:
        names = (Settings.MNIST_TRAIN_IMAGES, Settings.MNIST_TRAIN_LABELS)
    else:
        names = (Settings.MNIST_TEST_IMAGES, Settings.MNIST_TEST_LABELS)
    return load_idx(directory / names[0], directory / names[1], split=split)
