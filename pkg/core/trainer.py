"""
Minibatch SGD training for the classifier network
"""

import logging
from typing import List

import numpy as np
from tqdm import tqdm

from core.network import Network
from utils.exceptions import InvalidConfigError, TrainingDivergedError

logger = logging.getLogger(__name__)


class Trainer:
    """
    Plain SGD (no momentum) on mean cross-entropy

    Runs are reproducible: the shuffle order comes only from the seed.
    """

    def __init__(
        self,
        epochs: int,
        learning_rate: float,
        batch_size: int,
        seed: int = 0,
        show_progress: bool = False,
    ):
        """
        Args:
            epochs: Passes over the data (0 leaves parameters unchanged)
            learning_rate: SGD step size
            batch_size: Samples per update
            seed: Shuffle seed
            show_progress: Show a tqdm bar per epoch

        Raises:
            InvalidConfigError: If a hyperparameter is out of range
        """
        if epochs < 0:
            raise InvalidConfigError(f"epochs must be >= 0, got {epochs}")
        if not learning_rate > 0:
            raise InvalidConfigError(f"learning rate must be > 0, got {learning_rate}")
        if batch_size < 1:
            raise InvalidConfigError(f"batch size must be >= 1, got {batch_size}")

        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.show_progress = show_progress
        self.history: List[float] = []

    def train(self, net: Network, images: np.ndarray, labels: np.ndarray) -> Network:
        """
        Train a copy of net

        Args:
            net: Starting network (not modified)
            images: Inputs of shape (N, *net.input_shape)
            labels: Integer labels of shape (N,)

        Returns:
            Trained, frozen network

        Raises:
            InvalidConfigError: If the dataset is empty
            TrainingDivergedError: If the loss becomes non-finite
        """
        if len(images) == 0:
            raise InvalidConfigError("Cannot train on an empty dataset")

        model = net.copy()
        labels = np.asarray(labels, dtype=np.int64)
        rng = np.random.default_rng(self.seed)
        self.history = []

        for epoch in range(1, self.epochs + 1):
            order = rng.permutation(len(images))
            total_loss = 0.0
            batches = range(0, len(order), self.batch_size)

            with tqdm(total=len(order), unit=' img', desc=f"epoch {epoch}/{self.epochs}",
                      disable=not self.show_progress, leave=False) as pbar:
                for start in batches:
                    batch = order[start:start + self.batch_size]
                    loss, grads, _ = model.loss_and_gradients(images[batch], labels[batch])
                    if not np.isfinite(loss):
                        raise TrainingDivergedError(epoch, loss)
                    self._step(model, grads)
                    total_loss += loss * len(batch)
                    pbar.update(len(batch))

            mean_loss = total_loss / len(order)
            if not np.isfinite(mean_loss) or not all(np.all(np.isfinite(p)) for p in model.parameters):
                raise TrainingDivergedError(epoch, mean_loss)
            self.history.append(mean_loss)
            logger.info("epoch %d/%d loss=%.4f", epoch, self.epochs, mean_loss)

        return model.freeze()

    def _step(self, model: Network, grads: List[np.ndarray]):
        for param, grad in zip(model.parameters, grads):
            param -= self.learning_rate * grad


def train(
    net: Network,
    images: np.ndarray,
    labels: np.ndarray,
    epochs: int,
    learning_rate: float,
    batch_size: int,
    seed: int = 0,
    show_progress: bool = False,
) -> Network:
    """Train a copy of net; see Trainer.train"""
    return Trainer(epochs, learning_rate, batch_size, seed, show_progress).train(net, images, labels)
