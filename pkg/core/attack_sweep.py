"""
Attack-strength sweeps: fooling rate per epsilon and the PGD schedule search
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.constants import (
    AttackKind,
    BIM_DEFAULT_ITERATIONS,
    PGD_DEFAULT_EPSILON,
    PGD_DEFAULT_ITERATIONS,
    PGD_TUNE_EPS_STEP,
    PGD_TUNE_ITER_STEP,
)
from core.attacks import run_attack
from core.network import Network
from data.models import AdversarialExample, AttackSpec, Dataset, LabeledImage, SweepPoint
from utils.exceptions import InvalidConfigError

logger = logging.getLogger(__name__)

DEFAULT_MAX_TUNE_ITERATIONS = 200


def fooling_rate(net: Network, images: Sequence[LabeledImage], spec: AttackSpec,
                 threads: int = 1) -> Tuple[float, List[AdversarialExample]]:
    """
    Fraction of correctly-classified images that the attack fools

    Misclassified images are left out of the denominator. PGD image i uses
    random-start seed spec.seed + i.

    Returns:
        Tuple of (rate, successful examples)
    """
    candidates = [img for img in images if net.predict(img.pixels) == img.label]
    if not candidates:
        return 0.0, []

    def attempt(position: int) -> Optional[AdversarialExample]:
        return run_attack(net, candidates[position], spec, seed=spec.seed + position)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(executor.map(attempt, range(len(candidates))))
    examples = [example for example in results if example is not None]
    return len(examples) / len(candidates), examples


def correct_sample(net: Network, ds: Dataset, n: int, seed: int) -> List[LabeledImage]:
    """
    First n correctly-classified images of ds in a seeded random order

    Raises:
        InvalidConfigError: If n < 1 or ds has fewer than n correct images
    """
    if n < 1:
        raise InvalidConfigError(f"n must be >= 1, got {n}")
    order = np.random.default_rng(seed).permutation(len(ds))
    predictions = net.predict_batch(ds.pixels[order])
    chosen = [ds[int(i)] for i, p in zip(order, predictions) if p == ds.labels[i]][:n]
    if len(chosen) < n:
        raise InvalidConfigError(
            f"Only {len(chosen)} correctly classified images available, {n} requested"
        )
    return chosen


def epsilon_sweep(
    net: Network,
    ds: Dataset,
    kind: AttackKind,
    epsilons: Sequence[float],
    n: int,
    seed: int,
    iterations: Optional[int] = None,
    threads: int = 1,
) -> List[SweepPoint]:
    """
    Fooling rate at each epsilon on one fixed sample

    Args:
        net: Attacked classifier
        ds: Pool the sample is drawn from
        kind: Attack
        epsilons: Budgets to try, in order
        n: Sample size (correctly-classified images)
        seed: Sample and random-start seed
        iterations: BIM/PGD iterations (defaults to 50)
        threads: Images attacked concurrently
    """
    if iterations is None:
        iterations = PGD_DEFAULT_ITERATIONS if kind == AttackKind.PGD else BIM_DEFAULT_ITERATIONS
    sample = correct_sample(net, ds, n, seed)

    points = []
    for epsilon in epsilons:
        spec = AttackSpec(kind=kind, epsilon=epsilon, iterations=iterations, seed=seed)
        rate, examples = fooling_rate(net, sample, spec, threads)
        points.append(SweepPoint(epsilon, spec.iterations, len(examples), len(sample)))
        logger.info("%s eps=%.4f: %.2f%% fooled", kind.value, epsilon, 100 * rate)
    return points


def tune_pgd_schedule(
    net: Network,
    ds: Dataset,
    target_rate: float,
    n: int,
    seed: int,
    start_eps: float = PGD_DEFAULT_EPSILON,
    eps_step: float = PGD_TUNE_EPS_STEP,
    start_iters: int = PGD_DEFAULT_ITERATIONS,
    iter_step: int = PGD_TUNE_ITER_STEP,
    max_iters: int = DEFAULT_MAX_TUNE_ITERATIONS,
    min_eps: float = PGD_TUNE_EPS_STEP,
    threads: int = 1,
) -> Tuple[AttackSpec, List[SweepPoint]]:
    """
    Incremental PGD schedule search

    Iterations grow by iter_step from start_iters until the fooling rate
    reaches target_rate (or max_iters); then epsilon shrinks by eps_step
    while the target is still met at that iteration count.

    Returns:
        Tuple of (chosen schedule, every evaluated point in order)
    """
    if not 0 < target_rate <= 1:
        raise InvalidConfigError(f"target_rate must be in (0, 1], got {target_rate}")
    sample = correct_sample(net, ds, n, seed)
    trace: List[SweepPoint] = []

    def measure(epsilon: float, iterations: int) -> float:
        spec = AttackSpec(kind=AttackKind.PGD, epsilon=epsilon, iterations=iterations, seed=seed)
        rate, examples = fooling_rate(net, sample, spec, threads)
        trace.append(SweepPoint(epsilon, iterations, len(examples), len(sample)))
        logger.info("pgd eps=%.4f iters=%d: %.2f%% fooled", epsilon, iterations, 100 * rate)
        return rate

    epsilon, iterations = start_eps, start_iters
    rate = measure(epsilon, iterations)
    while rate < target_rate and iterations + iter_step <= max_iters:
        iterations += iter_step
        rate = measure(epsilon, iterations)

    if rate < target_rate:
        logger.warning("target %.2f not reached by %d iterations", target_rate, iterations)
    else:
        candidate = round(epsilon - eps_step, 6)
        while candidate >= min_eps and measure(candidate, iterations) >= target_rate:
            epsilon = candidate
            candidate = round(epsilon - eps_step, 6)

    return AttackSpec(kind=AttackKind.PGD, epsilon=epsilon, iterations=iterations, seed=seed), trace
