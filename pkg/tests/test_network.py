"""
Tests for layers and the classifier network
"""

import numpy as np
import pytest

from core.layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU, compose_shapes, lenet_lite
from core.network import Network, cross_entropy, softmax, zero_network
from utils.exceptions import InvalidInputShapeError, ModelFormatError


def small_conv_net(seed: int) -> Network:
    """conv(3x3, 2) -> relu -> pool(2) -> flatten -> dense(3) on 6x6x2 input"""
    layers = [Conv2D(3, 2), ReLU(), MaxPool2D(2), Flatten(), Dense(3)]
    return Network.build(layers, (6, 6, 2), num_classes=3, seed=seed)


def numeric_gradient(f, array: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        original = array[index]
        array[index] = original + h
        plus = f()
        array[index] = original - h
        minus = f()
        array[index] = original
        grad[index] = (plus - minus) / (2 * h)
    return grad


class TestSoftmax:
    """Test softmax and cross-entropy"""

    def test_rows_sum_to_one(self):
        """Test each softmax row is a distribution"""
        probs = softmax(np.array([[1.0, 2.0, 3.0], [1000.0, 1000.0, 1000.0]]))
        assert np.allclose(probs.sum(axis=1), 1.0)
        assert np.allclose(probs[1], 1.0 / 3)

    def test_large_logits_stay_finite(self):
        """Test softmax does not overflow"""
        probs = softmax(np.array([[1e4, 0.0]]))
        assert np.all(np.isfinite(probs))
        assert probs[0, 0] == pytest.approx(1.0)

    def test_cross_entropy_uniform(self):
        """Test loss of uniform logits is log(classes)"""
        loss, grad = cross_entropy(np.zeros((2, 10)), np.array([3, 7]))
        assert loss == pytest.approx(np.log(10))
        assert grad.shape == (2, 10)
        assert grad[0, 3] == pytest.approx((0.1 - 1.0) / 2)


class TestShapes:
    """Test shape composition"""

    def test_lenet_lite_mnist_shapes(self):
        """Test LeNet-lite composes on 28x28x1"""
        shapes = compose_shapes(lenet_lite(10), (28, 28, 1))
        assert shapes[1] == (24, 24, 6)
        assert shapes[3] == (12, 12, 6)
        assert shapes[4] == (8, 8, 16)
        assert shapes[6] == (4, 4, 16)
        assert shapes[-1] == (10,)

    def test_lenet_lite_cifar_shapes(self):
        """Test LeNet-lite composes on 32x32x3"""
        assert compose_shapes(lenet_lite(10), (32, 32, 3))[-1] == (10,)

    def test_pool_drops_odd_rows(self):
        """Test pooling floors odd sizes"""
        assert MaxPool2D(2).output_shape((5, 7, 3)) == (2, 3, 3)

    def test_incompatible_layers_rejected(self):
        """Test a dense layer fed an image is rejected"""
        with pytest.raises(ModelFormatError):
            Network([Dense(10)], (4, 4, 1))

    def test_wrong_class_count_rejected(self):
        """Test final size must equal num_classes"""
        with pytest.raises(ModelFormatError):
            Network([Flatten(), Dense(3)], (4, 4, 1), num_classes=10)


class TestForward:
    """Test inference"""

    def test_zero_network_is_uniform(self):
        """Test all-zero parameters give uniform probabilities"""
        net = zero_network((28, 28, 1))
        probs = net.forward(np.random.default_rng(0).random((28, 28, 1)))
        assert np.allclose(probs, 0.1)

    def test_wrong_shape_rejected(self):
        """Test forward rejects a mismatched input"""
        net = zero_network((28, 28, 1))
        with pytest.raises(InvalidInputShapeError):
            net.forward(np.zeros((28, 28)))
        with pytest.raises(InvalidInputShapeError):
            net.forward_batch(np.zeros((2, 32, 32, 3)))

    def test_batch_matches_single(self):
        """Test batched and single forward passes agree"""
        net = small_conv_net(0)
        batch = np.random.default_rng(1).random((5, 6, 6, 2))
        probs = net.forward_batch(batch)
        for i in range(5):
            assert np.allclose(probs[i], net.forward(batch[i]))
        assert list(net.predict_batch(batch, batch_size=2)) == [net.predict(x) for x in batch]

    def test_same_seed_same_parameters(self):
        """Test initialization is deterministic"""
        a, b = small_conv_net(3), small_conv_net(3)
        for p, q in zip(a.parameters, b.parameters):
            assert np.array_equal(p, q)

    def test_frozen_parameters_read_only(self):
        """Test freeze() makes parameters read-only"""
        net = small_conv_net(0).freeze()
        with pytest.raises(ValueError):
            net.parameters[0][0, 0, 0, 0] = 1.0

    def test_copy_is_independent(self):
        """Test copy() does not share parameter storage"""
        net = small_conv_net(0).freeze()
        clone = net.copy()
        clone.parameters[0][...] = 0.0
        assert not np.all(net.parameters[0] == 0.0)


class TestGradients:
    """Test analytic gradients against central finite differences"""

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_input_gradient(self, seed):
        """Test d(loss)/d(input)"""
        net = small_conv_net(seed)
        rng = np.random.default_rng(100 + seed)
        x = rng.random((6, 6, 2))
        label = int(rng.integers(3))

        analytic = net.input_gradient(x, label)
        numeric = numeric_gradient(lambda: net.loss(x, label), x)
        assert np.allclose(analytic, numeric, rtol=1e-4, atol=1e-7)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_parameter_gradients(self, seed):
        """Test d(loss)/d(parameters) for every layer"""
        net = small_conv_net(seed)
        rng = np.random.default_rng(200 + seed)
        batch = rng.random((3, 6, 6, 2))
        labels = rng.integers(3, size=3)

        _, grads, _ = net.loss_and_gradients(batch, labels)
        for param, grad in zip(net.parameters, grads):
            numeric = numeric_gradient(
                lambda: net.loss_and_gradients(batch, labels, need_params=False)[0], param
            )
            assert np.allclose(grad, numeric, rtol=1e-4, atol=1e-7)

    def test_lenet_lite_input_gradient(self):
        """Test gradient through the full LeNet-lite stack on a few pixels"""
        net = Network.lenet_lite((28, 28, 1), seed=0)
        rng = np.random.default_rng(5)
        x = rng.random((28, 28, 1))
        analytic = net.input_gradient(x, 4)

        h = 1e-6
        for index in [(0, 0, 0), (10, 13, 0), (27, 27, 0), (14, 3, 0)]:
            plus, minus = x.copy(), x.copy()
            plus[index] += h
            minus[index] -= h
            numeric = (net.loss(plus, 4) - net.loss(minus, 4)) / (2 * h)
            assert analytic[index] == pytest.approx(numeric, rel=1e-4, abs=1e-7)
