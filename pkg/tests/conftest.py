"""
Shared fixtures: tiny hand-built networks and IDX / CIFAR file writers
"""

import os
import shutil
import struct
import tempfile
from pathlib import Path

import numpy as np
import pytest

from config.constants import DatasetSource, DatasetSplit
from core.layers import Dense, Flatten
from core.network import Network
from data.models import Dataset, LabeledImage


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: needs real MNIST files and minutes of CPU")


def planted_pixel_net(shape=(10, 10, 1), pixel=(5, 5), gain=100.0) -> Network:
    """
    Two-class network decided by one pixel

    Class 1 wins exactly when pixel > 0.5; every other pixel is ignored.
    """
    net = Network([Flatten(), Dense(2)], shape, num_classes=2)
    weight = np.zeros((int(np.prod(shape)), 2))
    weight[np.ravel_multi_index(pixel + (0,), shape), 1] = gain
    net.layers[1].params = [weight, np.array([0.0, -gain / 2])]
    return net.freeze()


def linear_net(shape=(4, 4, 1), bias=4.0) -> Network:
    """
    Two-class linear network: logits (sum(x), bias - sum(x))

    Class 0 holds while sum(x) > bias / 2.
    """
    net = Network([Flatten(), Dense(2)], shape, num_classes=2)
    size = int(np.prod(shape))
    weight = np.stack([np.ones(size), -np.ones(size)], axis=1)
    net.layers[1].params = [weight, np.array([0.0, bias])]
    return net.freeze()


def constant_dataset(count: int, value: int, label: int, shape=(4, 4, 1),
                     split: DatasetSplit = DatasetSplit.TRAIN) -> Dataset:
    raw = np.full((count,) + shape, value, dtype=np.uint8)
    labels = np.full(count, label, dtype=np.uint8)
    return Dataset(raw=raw, labels=labels, source=DatasetSource.MNIST, split=split)


def write_idx(directory: Path, stem: str, images: np.ndarray, labels: np.ndarray):
    """Write an uncompressed IDX image/label pair; images are (N, rows, cols) uint8"""
    count, rows, cols = images.shape
    image_path = directory / f"{stem}-images-idx3-ubyte"
    label_path = directory / f"{stem}-labels-idx1-ubyte"
    image_path.write_bytes(struct.pack(">IIII", 0x803, count, rows, cols) + images.astype(np.uint8).tobytes())
    label_path.write_bytes(struct.pack(">II", 0x801, count) + labels.astype(np.uint8).tobytes())
    return image_path, label_path


@pytest.fixture
def temp_dir():
    """Create a temporary directory"""
    path = tempfile.mkdtemp()
    yield Path(path)
    # Cleanup
    if os.path.exists(path):
        shutil.rmtree(path)


@pytest.fixture
def planted_net():
    return planted_pixel_net()


@pytest.fixture
def small_linear_net():
    return linear_net()


@pytest.fixture
def bright_image():
    """4x4 image classified 0 by linear_net()"""
    return LabeledImage(pixels=np.full((4, 4, 1), 0.6, dtype=np.float32), label=0)
