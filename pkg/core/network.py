"""
Classifier network: softmax inference and input gradients
"""

import copy
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.constants import NUM_CLASSES
from core.layers import Layer, compose_shapes, dense_net, lenet_lite
from utils.exceptions import InvalidInputShapeError, ModelFormatError


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stable for large logits"""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy of softmax(logits) against integer labels

    Returns:
        Tuple of (mean loss, gradient with respect to logits)
    """
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(len(labels))
    loss = -log_probs[rows, labels].mean()

    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    return float(loss), grad / len(labels)


class Network:
    """
    Feed-forward classifier ending in softmax

    Forward passes never write to the network, so a trained (frozen)
    instance can be shared by concurrent callers.
    """

    def __init__(self, layers: List[Layer], input_shape: Sequence[int], num_classes: int = NUM_CLASSES):
        """
        Args:
            layers: Ordered layers; parameters may still be empty
            input_shape: (H, W, C) of one sample
            num_classes: Size of the softmax output

        Raises:
            ModelFormatError: If layer shapes do not compose into num_classes outputs
        """
        self.layers = layers
        self.input_shape = tuple(int(s) for s in input_shape)
        self.num_classes = num_classes
        self.shapes = compose_shapes(layers, self.input_shape)
        if self.shapes[-1] != (num_classes,):
            raise ModelFormatError(
                f"Network output shape {self.shapes[-1]} does not match {num_classes} classes"
            )
        self.frozen = False

    @classmethod
    def build(
        cls,
        layers: List[Layer],
        input_shape: Sequence[int],
        num_classes: int = NUM_CLASSES,
        seed: int = 0,
    ) -> 'Network':
        """Create a network with freshly initialized parameters (float32-representable)"""
        net = cls(layers, input_shape, num_classes)
        rng = np.random.default_rng(seed)
        for layer, layer_input in zip(net.layers, net.shapes):
            layer.initialize(rng, layer_input)
            layer.params = [p.astype(np.float32).astype(np.float64) for p in layer.params]
        return net

    @classmethod
    def lenet_lite(cls, input_shape: Sequence[int], num_classes: int = NUM_CLASSES, seed: int = 0) -> 'Network':
        return cls.build(lenet_lite(num_classes), input_shape, num_classes, seed)

    # ===== Parameters =====

    @property
    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in declaration order"""
        return [p for layer in self.layers for p in layer.params]

    def set_parameters(self, params: List[np.ndarray]):
        """Replace parameters in declaration order (shapes must match)"""
        offset = 0
        for layer in self.layers:
            count = len(layer.params)
            new = params[offset:offset + count]
            for old, value in zip(layer.params, new):
                if old.shape != value.shape:
                    raise ModelFormatError(f"Parameter shape {value.shape} != expected {old.shape}")
            layer.params = [np.array(v, dtype=np.float64) for v in new]
            offset += count
        self.frozen = False

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters))

    def copy(self) -> 'Network':
        """Deep copy with writable parameters"""
        clone = copy.deepcopy(self)
        for layer in clone.layers:
            layer.params = [np.array(p) for p in layer.params]
        clone.frozen = False
        return clone

    def freeze(self) -> 'Network':
        """
        Round parameters to float32 precision and make them read-only

        After freezing, saving and loading the model reproduces predictions
        exactly.
        """
        for layer in self.layers:
            rounded = [p.astype(np.float32).astype(np.float64) for p in layer.params]
            for p in rounded:
                p.setflags(write=False)
            layer.params = rounded
        self.frozen = True
        return self

    def descriptors(self) -> List[dict]:
        return [layer.descriptor() for layer in self.layers]

    # ===== Inference =====

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        if batch.ndim != len(self.input_shape) + 1 or tuple(batch.shape[1:]) != self.input_shape:
            raise InvalidInputShapeError(
                f"Expected input of shape (N, {', '.join(map(str, self.input_shape))}), got {batch.shape}"
            )
        return np.asarray(batch, dtype=np.float64)

    def _check_single(self, x: np.ndarray) -> np.ndarray:
        if tuple(np.shape(x)) != self.input_shape:
            raise InvalidInputShapeError(
                f"Expected input of shape {self.input_shape}, got {np.shape(x)}"
            )
        return np.asarray(x, dtype=np.float64)[None, ...]

    def _forward(self, batch: np.ndarray, keep_caches: bool) -> Tuple[np.ndarray, list]:
        caches = []
        out = batch
        for layer in self.layers:
            out, cache = layer.forward(out)
            if keep_caches:
                caches.append(cache)
        return out, caches

    def logits_batch(self, batch: np.ndarray) -> np.ndarray:
        out, _ = self._forward(self._check_batch(batch), keep_caches=False)
        return out

    def forward_batch(self, batch: np.ndarray) -> np.ndarray:
        """Class probabilities for a batch of shape (N, H, W, C)"""
        return softmax(self.logits_batch(batch))

    def forward(self, x: np.ndarray) -> np.ndarray:
        """
        Class probabilities for one sample

        Raises:
            InvalidInputShapeError: If x.shape != input_shape
        """
        out, _ = self._forward(self._check_single(x), keep_caches=False)
        return softmax(out)[0]

    def predict(self, x: np.ndarray) -> int:
        return int(np.argmax(self.forward(x)))

    def predict_batch(self, batch: np.ndarray, batch_size: int = 256) -> np.ndarray:
        if len(batch) == 0:
            return np.zeros(0, dtype=np.int64)
        labels = [
            np.argmax(self.logits_batch(batch[start:start + batch_size]), axis=1)
            for start in range(0, len(batch), batch_size)
        ]
        return np.concatenate(labels)

    def accuracy(self, images: np.ndarray, labels: np.ndarray) -> float:
        if len(images) == 0:
            return 0.0
        return float(np.mean(self.predict_batch(images) == np.asarray(labels)))

    # ===== Gradients =====

    def loss_and_gradients(
        self, batch: np.ndarray, labels: np.ndarray, need_params: bool = True
    ) -> Tuple[float, List[np.ndarray], np.ndarray]:
        """
        Cross-entropy loss with parameter and input gradients

        Args:
            batch: Inputs of shape (N, H, W, C)
            labels: Integer labels of shape (N,)
            need_params: Skip collecting parameter gradients when False

        Returns:
            Tuple of (mean loss, parameter gradients in declaration order, input gradient)
        """
        batch = self._check_batch(batch)
        labels = np.asarray(labels, dtype=np.int64)
        logits, caches = self._forward(batch, keep_caches=True)
        loss, grad = cross_entropy(logits, labels)

        param_grads: List[List[np.ndarray]] = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            grad, layer_grads = layer.backward(grad, cache)
            if need_params:
                param_grads.append(layer_grads)

        flat_grads = [g for layer_grads in reversed(param_grads) for g in layer_grads]
        return loss, flat_grads, grad

    def input_gradient(self, x: np.ndarray, label: int) -> np.ndarray:
        """
        d(cross-entropy)/dx for one sample

        Raises:
            InvalidInputShapeError: If x.shape != input_shape
        """
        batch = self._check_single(x)
        _, _, grad = self.loss_and_gradients(batch, np.array([label]), need_params=False)
        return grad[0]

    def loss(self, x: np.ndarray, label: int) -> float:
        batch = self._check_single(x)
        loss, _ = cross_entropy(self.logits_batch(batch), np.array([label]))
        return loss


def zero_network(input_shape: Sequence[int], num_classes: int = NUM_CLASSES,
                 hidden: Optional[List[int]] = None) -> Network:
    """Dense network with all-zero parameters (uniform output)"""
    net = Network.build(dense_net(hidden, num_classes), input_shape, num_classes)
    net.set_parameters([np.zeros_like(p) for p in net.parameters])
    return net
