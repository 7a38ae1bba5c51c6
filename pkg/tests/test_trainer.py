"""
Tests for SGD training
"""

import numpy as np
import pytest

from core.layers import Dense, Flatten
from core.network import Network
from core.trainer import Trainer, train
from utils.exceptions import InvalidConfigError, TrainingDivergedError


def toy_problem(count: int, seed: int):
    """2x2 images labeled 1 when their mean exceeds 0.5"""
    rng = np.random.default_rng(seed)
    images = rng.random((count, 2, 2, 1))
    labels = (images.mean(axis=(1, 2, 3)) > 0.5).astype(np.int64)
    return images, labels


def toy_net(seed: int = 0) -> Network:
    return Network.build([Flatten(), Dense(2)], (2, 2, 1), num_classes=2, seed=seed)


class TestTrainer:
    """Test the training loop"""

    def test_learns_separable_problem(self):
        """Test a linear problem is learned"""
        images, labels = toy_problem(400, 0)
        test_images, test_labels = toy_problem(200, 1)
        trained = train(toy_net(), images, labels, epochs=50, learning_rate=1.0, batch_size=16, seed=0)
        assert trained.accuracy(test_images, test_labels) >= 0.85

    def test_zero_epochs_keeps_parameters(self):
        """Test epochs = 0 returns the starting parameters"""
        net = toy_net().freeze()
        images, labels = toy_problem(20, 0)
        trained = train(net, images, labels, epochs=0, learning_rate=0.1, batch_size=4)
        for p, q in zip(net.parameters, trained.parameters):
            assert np.array_equal(p, q)

    def test_deterministic(self):
        """Test one seed gives identical parameters"""
        images, labels = toy_problem(64, 0)
        a = train(toy_net(), images, labels, epochs=3, learning_rate=0.5, batch_size=8, seed=4)
        b = train(toy_net(), images, labels, epochs=3, learning_rate=0.5, batch_size=8, seed=4)
        for p, q in zip(a.parameters, b.parameters):
            assert np.array_equal(p, q)

    def test_input_network_unchanged(self):
        """Test training works on a copy"""
        net = toy_net()
        before = [p.copy() for p in net.parameters]
        images, labels = toy_problem(32, 0)
        train(net, images, labels, epochs=2, learning_rate=0.5, batch_size=8)
        for p, q in zip(before, net.parameters):
            assert np.array_equal(p, q)

    def test_result_is_frozen(self):
        """Test the trained network is float32-rounded and read-only"""
        images, labels = toy_problem(32, 0)
        trained = train(toy_net(), images, labels, epochs=1, learning_rate=0.5, batch_size=8)
        assert trained.frozen
        for p in trained.parameters:
            assert np.array_equal(p, p.astype(np.float32).astype(np.float64))

    def test_history_per_epoch(self):
        """Test one mean loss is recorded per epoch"""
        images, labels = toy_problem(32, 0)
        trainer = Trainer(epochs=4, learning_rate=0.5, batch_size=8)
        trainer.train(toy_net(), images, labels)
        assert len(trainer.history) == 4
        assert trainer.history[-1] < trainer.history[0]

    def test_divergence(self):
        """Test non-finite parameters stop training in epoch 1"""
        net = toy_net()
        net.set_parameters([np.full_like(p, np.nan) for p in net.parameters])
        images, labels = toy_problem(16, 0)
        with pytest.raises(TrainingDivergedError) as info:
            train(net, images, labels, epochs=3, learning_rate=0.1, batch_size=4)
        assert info.value.epoch == 1

    def test_invalid_arguments(self):
        """Test bad hyperparameters and empty data are rejected"""
        with pytest.raises(InvalidConfigError):
            Trainer(epochs=-1, learning_rate=0.1, batch_size=4)
        with pytest.raises(InvalidConfigError):
            Trainer(epochs=1, learning_rate=0.0, batch_size=4)
        with pytest.raises(InvalidConfigError):
            Trainer(epochs=1, learning_rate=0.1, batch_size=0)
        with pytest.raises(InvalidConfigError):
            Trainer(epochs=1, learning_rate=0.1, batch_size=4).train(
                toy_net(), np.zeros((0, 2, 2, 1)), np.zeros(0, dtype=np.int64))
