"""
Network layers with explicit forward/backward passes

Layers hold parameters only. Forward passes return a cache instead of
storing activations on the layer, so one network can serve concurrent
inference calls.
"""

from typing import Any, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from utils.exceptions import ModelFormatError


def glorot_uniform(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform in [-s, s] with s = sqrt(6 / (fan_in + fan_out))"""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer: no parameters, identity shape"""

    kind = "layer"

    def __init__(self):
        self.params: List[np.ndarray] = []

    def output_shape(self, input_shape: tuple) -> tuple:
        return input_shape

    def initialize(self, rng: np.random.Generator, input_shape: tuple):
        """Allocate parameters for the given (H, W, C) or (D,) input"""

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, grad: np.ndarray, cache: Any) -> Tuple[np.ndarray, List[np.ndarray]]:
        raise NotImplementedError

    def param_shapes(self, input_shape: tuple) -> List[tuple]:
        return []

    def descriptor(self) -> dict:
        return {'kind': self.kind}


class Conv2D(Layer):
    """Valid (unpadded) stride-1 convolution over NHWC input"""

    kind = "conv"

    def __init__(self, kernel_size: int, filters: int):
        super().__init__()
        self.kernel_size = kernel_size
        self.filters = filters

    @property
    def weight(self) -> np.ndarray:
        return self.params[0]

    @property
    def bias(self) -> np.ndarray:
        return self.params[1]

    def output_shape(self, input_shape: tuple) -> tuple:
        if len(input_shape) != 3:
            raise ModelFormatError(f"conv expects (H, W, C) input, got {input_shape}")
        h, w, _ = input_shape
        k = self.kernel_size
        if h < k or w < k:
            raise ModelFormatError(f"conv kernel {k} larger than input {input_shape}")
        return (h - k + 1, w - k + 1, self.filters)

    def param_shapes(self, input_shape: tuple) -> List[tuple]:
        k = self.kernel_size
        return [(k, k, input_shape[2], self.filters), (self.filters,)]

    def initialize(self, rng: np.random.Generator, input_shape: tuple):
        k = self.kernel_size
        channels = input_shape[2]
        weight_shape, bias_shape = self.param_shapes(input_shape)
        self.params = [
            glorot_uniform(rng, weight_shape, k * k * channels, k * k * self.filters),
            np.zeros(bias_shape),
        ]

    def forward(self, x):
        k = self.kernel_size
        # (N, Ho, Wo, C, k, k)
        windows = sliding_window_view(x, (k, k), axis=(1, 2))
        out = np.tensordot(windows, self.weight, axes=([3, 4, 5], [2, 0, 1])) + self.bias
        return out, x

    def backward(self, grad, cache):
        x = cache
        k = self.kernel_size
        windows = sliding_window_view(x, (k, k), axis=(1, 2))
        grad_weight = np.tensordot(windows, grad, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
        grad_bias = grad.sum(axis=(0, 1, 2))

        padded = np.pad(grad, ((0, 0), (k - 1, k - 1), (k - 1, k - 1), (0, 0)))
        grad_windows = sliding_window_view(padded, (k, k), axis=(1, 2))
        flipped = self.weight[::-1, ::-1]
        grad_input = np.tensordot(grad_windows, flipped, axes=([3, 4, 5], [3, 0, 1]))
        return grad_input, [grad_weight, grad_bias]

    def descriptor(self) -> dict:
        return {'kind': self.kind, 'kernel_size': self.kernel_size, 'filters': self.filters}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        return np.maximum(x, 0.0), x > 0

    def backward(self, grad, cache):
        return grad * cache, []


class MaxPool2D(Layer):
    """Non-overlapping max pooling; trailing rows/columns that don't fill a window are dropped"""

    kind = "pool"

    def __init__(self, window: int):
        super().__init__()
        self.window = window

    def output_shape(self, input_shape: tuple) -> tuple:
        if len(input_shape) != 3:
            raise ModelFormatError(f"pool expects (H, W, C) input, got {input_shape}")
        h, w, c = input_shape
        if h < self.window or w < self.window:
            raise ModelFormatError(f"pool window {self.window} larger than input {input_shape}")
        return (h // self.window, w // self.window, c)

    def _windows(self, x: np.ndarray) -> np.ndarray:
        n, h, w, c = x.shape
        p = self.window
        ho, wo = h // p, w // p
        cropped = x[:, :ho * p, :wo * p, :]
        # (N, Ho, Wo, C, p*p)
        return cropped.reshape(n, ho, p, wo, p, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, p * p)

    def forward(self, x):
        windows = self._windows(x)
        argmax = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
        return out, (x.shape, argmax)

    def backward(self, grad, cache):
        input_shape, argmax = cache
        n, h, w, c = input_shape
        p = self.window
        ho, wo = grad.shape[1], grad.shape[2]
        routed = np.zeros((n, ho, wo, c, p * p), dtype=grad.dtype)
        np.put_along_axis(routed, argmax[..., None], grad[..., None], axis=-1)
        routed = routed.reshape(n, ho, wo, c, p, p).transpose(0, 1, 4, 2, 5, 3).reshape(n, ho * p, wo * p, c)
        grad_input = np.zeros(input_shape, dtype=grad.dtype)
        grad_input[:, :ho * p, :wo * p, :] = routed
        return grad_input, []

    def descriptor(self) -> dict:
        return {'kind': self.kind, 'window': self.window}


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape: tuple) -> tuple:
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad, cache):
        return grad.reshape(cache), []


class Dense(Layer):
    """Fully-connected layer over (N, D) input"""

    kind = "dense"

    def __init__(self, units: int):
        super().__init__()
        self.units = units

    @property
    def weight(self) -> np.ndarray:
        return self.params[0]

    @property
    def bias(self) -> np.ndarray:
        return self.params[1]

    def output_shape(self, input_shape: tuple) -> tuple:
        if len(input_shape) != 1:
            raise ModelFormatError(f"dense expects flat input, got {input_shape}")
        return (self.units,)

    def param_shapes(self, input_shape: tuple) -> List[tuple]:
        return [(input_shape[0], self.units), (self.units,)]

    def initialize(self, rng: np.random.Generator, input_shape: tuple):
        weight_shape, bias_shape = self.param_shapes(input_shape)
        self.params = [
            glorot_uniform(rng, weight_shape, input_shape[0], self.units),
            np.zeros(bias_shape),
        ]

    def forward(self, x):
        return x @ self.weight + self.bias, x

    def backward(self, grad, cache):
        x = cache
        return grad @ self.weight.T, [x.T @ grad, grad.sum(axis=0)]

    def descriptor(self) -> dict:
        return {'kind': self.kind, 'units': self.units}


_LAYER_TYPES = {
    Conv2D.kind: lambda d: Conv2D(int(d['kernel_size']), int(d['filters'])),
    ReLU.kind: lambda d: ReLU(),
    MaxPool2D.kind: lambda d: MaxPool2D(int(d['window'])),
    Flatten.kind: lambda d: Flatten(),
    Dense.kind: lambda d: Dense(int(d['units'])),
}


def layer_from_descriptor(descriptor: dict) -> Layer:
    """
    Build an uninitialized layer from its descriptor

    Raises:
        ModelFormatError: Unknown layer kind or missing fields
    """
    kind = descriptor.get('kind')
    if kind not in _LAYER_TYPES:
        raise ModelFormatError(f"Unknown layer kind: {kind!r}")
    try:
        return _LAYER_TYPES[kind](descriptor)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"Bad descriptor for {kind} layer: {e}")


def compose_shapes(layers: List[Layer], input_shape: tuple) -> List[tuple]:
    """
    Input shape of every layer followed by the final output shape

    Raises:
        ModelFormatError: If consecutive layers do not compose
    """
    shapes = [tuple(input_shape)]
    for layer in layers:
        shapes.append(layer.output_shape(shapes[-1]))
    return shapes


def expected_param_shapes(layers: List[Layer], input_shape: tuple) -> List[tuple]:
    """Parameter shapes in declaration order"""
    shapes = compose_shapes(layers, input_shape)
    expected: List[tuple] = []
    for layer, layer_input in zip(layers, shapes):
        expected.extend(layer.param_shapes(layer_input))
    return expected


def lenet_lite(num_classes: int) -> List[Layer]:
    """conv(5x5, 6) -> pool(2) -> conv(5x5, 16) -> pool(2) -> dense(num_classes)"""
    return [
        Conv2D(5, 6),
        ReLU(),
        MaxPool2D(2),
        Conv2D(5, 16),
        ReLU(),
        MaxPool2D(2),
        Flatten(),
        Dense(num_classes),
    ]


def dense_net(hidden: Optional[List[int]], num_classes: int) -> List[Layer]:
    """Flatten followed by ReLU-separated dense layers"""
    layers: List[Layer] = [Flatten()]
    for units in hidden or []:
        layers.extend([Dense(units), ReLU()])
    layers.append(Dense(num_classes))
    return layers
