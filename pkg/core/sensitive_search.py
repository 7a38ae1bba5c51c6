"""
Differential-evolution search for sensitive points

A candidate is d pixels, each encoded as (row, column, channel values...).
Fitness is the classifier's probability for the protected label after the
candidate's pixels are written into the image; lower is better.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from config.constants import MAX_CHANNEL_VALUE
from core.network import Network
from data.models import Candidate, SearchConfig, SearchOutcome, SensitivePoint
from utils.exceptions import (
    InvalidConfigError,
    InvalidInputShapeError,
    PointOutOfBoundsError,
    PopulationTooSmallError,
)

logger = logging.getLogger(__name__)

MIN_POPULATION = 4
EVAL_BATCH_SIZE = 256

# (generation, fitness of every individual)
ProgressCallback = Callable[[int, np.ndarray], None]


@dataclass(frozen=True)
class GeneBounds:
    """Inclusive per-gene ranges for one image shape"""
    height: int
    width: int
    channels: int

    @classmethod
    def for_image(cls, image_shape: Sequence[int]) -> 'GeneBounds':
        height, width, channels = image_shape
        return cls(int(height), int(width), int(channels))

    @property
    def genes_per_point(self) -> int:
        return 2 + self.channels

    @property
    def high(self) -> np.ndarray:
        return np.array(
            [self.height - 1, self.width - 1] + [MAX_CHANNEL_VALUE] * self.channels,
            dtype=np.float64,
        )

    def contains(self, genes: np.ndarray) -> np.ndarray:
        """Boolean mask of genes inside their range"""
        return (genes >= 0) & (genes <= self.high)

    def sample(self, shape: tuple, rng: np.random.Generator) -> np.ndarray:
        """
        Random genes of shape (..., 2 + C)

        Coordinates are uniform integers over the image; channel values are
        uniform reals in [0, 255].
        """
        genes = np.empty(shape, dtype=np.float64)
        genes[..., 0] = rng.integers(0, self.height, size=shape[:-1])
        genes[..., 1] = rng.integers(0, self.width, size=shape[:-1])
        genes[..., 2:] = rng.uniform(0, MAX_CHANNEL_VALUE, size=shape[:-1] + (self.channels,))
        return genes


def apply_points(pixels: np.ndarray, points: Sequence[SensitivePoint]) -> np.ndarray:
    """
    Copy of pixels with each point's channels set to values / 255

    Points are written in order, so for duplicate coordinates the last one wins.

    Raises:
        PointOutOfBoundsError: If a coordinate lies outside the image
        InvalidInputShapeError: If a point's value count differs from the channel count
    """
    height, width, channels = pixels.shape
    out = np.array(pixels, dtype=np.float32, copy=True)
    for point in points:
        if not (0 <= point.x < height and 0 <= point.y < width):
            raise PointOutOfBoundsError(
                f"Point ({point.x}, {point.y}) outside {height}x{width} image"
            )
        if len(point.values) != channels:
            raise InvalidInputShapeError(
                f"Point has {len(point.values)} channel values, image has {channels}"
            )
        out[point.x, point.y] = np.asarray(point.values, dtype=np.float32) / np.float32(MAX_CHANNEL_VALUE)
    return out


def _decode(genes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows, columns and float32 channel values of a (N, d, 2 + C) gene batch"""
    rounded = np.rint(genes)
    rows = rounded[..., 0].astype(np.int64)
    cols = rounded[..., 1].astype(np.int64)
    values = np.clip(rounded[..., 2:], 0, MAX_CHANNEL_VALUE).astype(np.float32) / np.float32(MAX_CHANNEL_VALUE)
    return rows, cols, values


def apply_candidates(pixels: np.ndarray, genes: np.ndarray) -> np.ndarray:
    """
    Batch form of apply_points for N candidates

    Args:
        pixels: Image of shape (H, W, C)
        genes: Gene batch of shape (N, d, 2 + C)

    Returns:
        float32 batch of shape (N, H, W, C)
    """
    rows, cols, values = _decode(genes)
    batch = np.repeat(np.asarray(pixels, dtype=np.float32)[None, ...], len(genes), axis=0)
    which = np.arange(len(genes))
    # one point index at a time keeps last-write-wins for duplicates
    for j in range(genes.shape[1]):
        batch[which, rows[:, j], cols[:, j]] = values[:, j]
    return batch


class FitnessEvaluator:
    """
    Scores candidates against one image and one protected label

    Forward passes are batched; with threads > 1 the batches run
    concurrently on the (read-only) network.
    """

    def __init__(self, net: Network, pixels: np.ndarray, protected_label: int, threads: int = 1):
        self.net = net
        self.pixels = np.asarray(pixels, dtype=np.float32)
        self.bounds = GeneBounds.for_image(self.pixels.shape)
        self.protected_label = protected_label
        self.threads = max(1, threads)
        self.evaluations = 0

    def _score(self, genes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        probs = self.net.forward_batch(apply_candidates(self.pixels, genes))
        return probs[:, self.protected_label], np.argmax(probs, axis=1)

    def evaluate(self, candidates: List[Candidate]) -> np.ndarray:
        """
        Set fitness on each candidate

        Returns:
            Predicted label of each perturbed image
        """
        if not candidates:
            return np.zeros(0, dtype=np.int64)
        genes = np.stack([c.genes for c in candidates])
        chunks = [genes[start:start + EVAL_BATCH_SIZE] for start in range(0, len(genes), EVAL_BATCH_SIZE)]

        if self.threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                results = list(executor.map(self._score, chunks))
        else:
            results = [self._score(chunk) for chunk in chunks]

        fitness = np.concatenate([r[0] for r in results])
        labels = np.concatenate([r[1] for r in results])
        for candidate, value in zip(candidates, fitness):
            candidate.fitness = float(value)
        self.evaluations += len(candidates)
        return labels

    def __call__(self, candidate: Candidate) -> float:
        self.evaluate([candidate])
        return candidate.fitness


def _draw_donors(n: int, i: int, rng: np.random.Generator) -> Tuple[int, int, int]:
    """Three distinct indices in [0, n), all different from i"""
    picks = rng.choice(n - 1, size=3, replace=False)
    picks = picks + (picks >= i)
    return int(picks[0]), int(picks[1]), int(picks[2])


def de_mutate(pop: List[Candidate], i: int, alpha: float, rng: np.random.Generator,
              bounds: Optional[GeneBounds] = None) -> Candidate:
    """
    Mutant v = pop[r1] + alpha * (pop[r2] - pop[r3])

    Args:
        pop: Current population
        i: Index of the target individual (excluded from r1, r2, r3)
        alpha: Scaling factor
        rng: Random source
        bounds: Gene ranges; genes falling outside are redrawn at random

    Raises:
        PopulationTooSmallError: If len(pop) < 4
    """
    if len(pop) < MIN_POPULATION:
        raise PopulationTooSmallError(
            f"Mutation needs at least {MIN_POPULATION} individuals, got {len(pop)}"
        )
    r1, r2, r3 = _draw_donors(len(pop), i, rng)
    genes = pop[r1].genes + alpha * (pop[r2].genes - pop[r3].genes)

    if bounds is not None:
        inside = bounds.contains(genes)
        if not inside.all():
            genes = np.where(inside, genes, bounds.sample(genes.shape, rng))
    return pop[i].with_genes(genes)


def de_crossover(parent: Candidate, mutant: Candidate, cr: float,
                 rng: np.random.Generator) -> Candidate:
    """
    Binomial crossover with one forced mutant gene

    Raises:
        InvalidInputShapeError: If the encodings differ in length
    """
    if parent.genes.shape != mutant.genes.shape:
        raise InvalidInputShapeError(
            f"Encoding mismatch: {parent.genes.shape} vs {mutant.genes.shape}"
        )
    length = parent.flat.size
    take = rng.random(length) <= cr
    take[rng.integers(length)] = True
    return parent.with_genes(np.where(take, mutant.flat, parent.flat))


def de_select(parent: Candidate, child: Candidate,
              fitness_fn: Callable[[Candidate], float]) -> Candidate:
    """Greedy survivor selection; ties go to the child"""
    if parent.fitness is None:
        fitness_fn(parent)
    if child.fitness is None:
        fitness_fn(child)
    return child if child.fitness <= parent.fitness else parent


def _outcome(candidate: Candidate, flipped: bool, generation: int, label: int,
             evaluator: FitnessEvaluator, history: List[float]) -> SearchOutcome:
    return SearchOutcome(
        points=candidate.points,
        flipped=flipped,
        generations_used=generation,
        best_fitness=float(candidate.fitness),
        evaluations=evaluator.evaluations,
        predicted_label=int(label),
        fitness_history=history,
    )


def find_sensitive_points(
    net: Network,
    pixels: np.ndarray,
    protected_label: int,
    cfg: SearchConfig,
    callback: Optional[ProgressCallback] = None,
    threads: int = 1,
) -> SearchOutcome:
    """
    Search for d pixels whose rewrite minimizes confidence in protected_label

    Each generation builds one trial per individual from the generation's
    snapshot, scores the trials as a batch, then selects per index. The
    search stops as soon as an accepted individual changes the prediction.

    Args:
        net: Classifier (not modified)
        pixels: Image of shape net.input_shape
        protected_label: Label whose probability is minimized
        cfg: Search hyperparameters
        callback: Called with (generation, per-individual fitness) after each generation
        threads: Workers for fitness batches

    Returns:
        SearchOutcome; when nothing flips, the lowest-fitness individual

    Raises:
        InvalidInputShapeError: If pixels do not match the network
        InvalidConfigError: If protected_label is not a class index
        PopulationTooSmallError: If generations are requested with pop_size < 4
    """
    pixels = np.asarray(pixels, dtype=np.float32)
    if pixels.shape != net.input_shape:
        raise InvalidInputShapeError(f"Expected image of shape {net.input_shape}, got {pixels.shape}")
    if not 0 <= protected_label < net.num_classes:
        raise InvalidConfigError(f"protected_label {protected_label} is not a class index")
    if cfg.max_iter > 0 and cfg.pop_size < MIN_POPULATION:
        raise PopulationTooSmallError(
            f"pop_size must be >= {MIN_POPULATION} when max_iter > 0, got {cfg.pop_size}"
        )

    evaluator = FitnessEvaluator(net, pixels, protected_label, threads)
    bounds = evaluator.bounds

    if cfg.d == 0:
        empty = Candidate(genes=np.zeros((0, bounds.genes_per_point)))
        label = evaluator.evaluate([empty])[0]
        return _outcome(empty, bool(label != protected_label), 0, label, evaluator, [empty.fitness])

    rng = np.random.default_rng(cfg.seed)
    population = [
        Candidate(genes=genes)
        for genes in bounds.sample((cfg.pop_size, cfg.d, bounds.genes_per_point), rng)
    ]
    labels = evaluator.evaluate(population)
    history = [min(c.fitness for c in population)]

    flipped = np.flatnonzero(labels != protected_label)
    if flipped.size:
        first = int(flipped[0])
        return _outcome(population[first], True, 0, labels[first], evaluator, history)

    for generation in range(1, cfg.max_iter + 1):
        trials = [
            de_crossover(population[i], de_mutate(population, i, cfg.alpha, rng, bounds), cfg.cr, rng)
            for i in range(cfg.pop_size)
        ]
        trial_labels = evaluator.evaluate(trials)

        for i, trial in enumerate(trials):
            if de_select(population[i], trial, evaluator) is trial:
                population[i] = trial
                labels[i] = trial_labels[i]
                if trial_labels[i] != protected_label:
                    history.append(min(c.fitness for c in population))
                    logger.debug("flip at generation %d (individual %d)", generation, i)
                    return _outcome(trial, True, generation, trial_labels[i], evaluator, history)

        fitness = np.array([c.fitness for c in population])
        history.append(float(fitness.min()))
        if callback is not None:
            callback(generation, fitness)

    best_index = int(np.argmin([c.fitness for c in population]))
    return _outcome(population[best_index], False, cfg.max_iter, labels[best_index], evaluator, history)
