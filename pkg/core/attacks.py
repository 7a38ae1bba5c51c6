"""
Gradient attacks (FGSM, BIM, PGD) and adversarial-set construction
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from config.constants import AttackKind, RESAMPLE_FACTOR
from core.network import Network
from data.dataset_loader import sample_counts
from data.models import AdversarialExample, AttackSpec, Dataset, LabeledImage
from utils.exceptions import AttackExhaustedError, InvalidConfigError, InvalidInputShapeError

logger = logging.getLogger(__name__)


def lp_norm(x: np.ndarray, x_adv: np.ndarray, p: Union[int, float, str]) -> float:
    """
    Size of the perturbation x_adv - x

    Args:
        p: 0 (changed elements), 2 (Euclidean) or inf / "inf" (max absolute change)
    """
    if np.shape(x) != np.shape(x_adv):
        raise InvalidInputShapeError(f"Shape mismatch: {np.shape(x)} vs {np.shape(x_adv)}")
    diff = np.asarray(x_adv, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    if p == 0:
        return float(np.count_nonzero(diff))
    if p == 2:
        return float(np.sqrt(np.sum(diff * diff)))
    if p in (np.inf, "inf"):
        return float(np.max(np.abs(diff))) if diff.size else 0.0
    raise ValueError(f"p must be 0, 2 or inf, got {p!r}")


def _signed_step(x: np.ndarray, grad: np.ndarray, step: float,
                 origin: np.ndarray, epsilon: float) -> np.ndarray:
    """x + step * sign(grad), projected onto the eps-ball around origin and [0, 1]"""
    moved = x.astype(np.float64) + step * np.sign(grad)
    moved = np.clip(moved, origin.astype(np.float64) - epsilon, origin.astype(np.float64) + epsilon)
    return np.clip(moved, 0.0, 1.0).astype(np.float32)


def _example(img: LabeledImage, perturbed: np.ndarray, predicted: int, seed: int) -> AdversarialExample:
    return AdversarialExample(
        original=img,
        perturbed=perturbed,
        predicted_label=predicted,
        true_label=img.label,
        l0=lp_norm(img.pixels, perturbed, 0),
        l2=lp_norm(img.pixels, perturbed, 2),
        linf=lp_norm(img.pixels, perturbed, np.inf),
        seed=seed,
    )


def _iterate(net: Network, img: LabeledImage, start: np.ndarray, epsilon: float,
             iterations: int, step_size: float) -> Tuple[np.ndarray, int]:
    """Signed-gradient steps until the label flips or iterations run out"""
    origin = np.asarray(img.pixels, dtype=np.float32)
    x = start
    predicted = img.label
    for _ in range(iterations):
        grad = net.input_gradient(x, img.label)
        x = _signed_step(x, grad, step_size, origin, epsilon)
        predicted = net.predict(x)
        if predicted != img.label:
            break
    return x, predicted


def _correctly_classified(net: Network, img: LabeledImage) -> bool:
    return net.predict(img.pixels) == img.label


def fgsm(net: Network, img: LabeledImage, epsilon: float) -> Optional[AdversarialExample]:
    """
    Single-step attack: clamp(x + eps * sign(dLoss/dx), 0, 1)

    Returns:
        AdversarialExample if the prediction flips, else None (also None when
        net already misclassifies img)
    """
    if not _correctly_classified(net, img):
        return None
    x, predicted = _iterate(net, img, np.asarray(img.pixels, dtype=np.float32), epsilon, 1, epsilon)
    return _example(img, x, predicted, 0) if predicted != img.label else None


def bim(net: Network, img: LabeledImage, epsilon: float, iterations: int,
        step_size: Optional[float] = None) -> Optional[AdversarialExample]:
    """
    Iterative FGSM with projection onto the eps-ball, stopping at the first flip

    Returns:
        AdversarialExample or None when not fooled
    """
    if step_size is None:
        step_size = AttackSpec.default_step_size(AttackKind.BIM, epsilon, iterations)
    if not _correctly_classified(net, img):
        return None
    x, predicted = _iterate(net, img, np.asarray(img.pixels, dtype=np.float32),
                            epsilon, iterations, step_size)
    return _example(img, x, predicted, 0) if predicted != img.label else None


def pgd(net: Network, img: LabeledImage, epsilon: float, iterations: int,
        step_size: Optional[float] = None, random_start: bool = True,
        seed: int = 0) -> Optional[AdversarialExample]:
    """
    BIM from an optional uniform random start inside the eps-ball

    Returns:
        AdversarialExample or None when not fooled
    """
    if step_size is None:
        step_size = AttackSpec.default_step_size(AttackKind.PGD, epsilon, iterations)
    if not _correctly_classified(net, img):
        return None

    origin = np.asarray(img.pixels, dtype=np.float32)
    start = origin
    if random_start:
        rng = np.random.default_rng(seed)
        noise = rng.uniform(-epsilon, epsilon, size=origin.shape)
        start = np.clip(origin.astype(np.float64) + noise, 0.0, 1.0).astype(np.float32)

    x, predicted = _iterate(net, img, start, epsilon, iterations, step_size)
    return _example(img, x, predicted, seed) if predicted != img.label else None


def run_attack(net: Network, img: LabeledImage, spec: AttackSpec,
               seed: Optional[int] = None) -> Optional[AdversarialExample]:
    """Dispatch on spec.kind; seed overrides spec.seed for PGD's random start"""
    if spec.kind == AttackKind.FGSM:
        return fgsm(net, img, spec.epsilon)
    if spec.kind == AttackKind.BIM:
        return bim(net, img, spec.epsilon, spec.iterations, spec.step_size)
    return pgd(net, img, spec.epsilon, spec.iterations, spec.step_size,
               spec.random_start, spec.seed if seed is None else seed)


def _attack_pool(net: Network, pool: Dataset, spec: AttackSpec, need: int,
                 rng: np.random.Generator, threads: int, pbar) -> List[AdversarialExample]:
    """Draw images from pool in random order until `need` attacks succeed"""
    order = rng.permutation(len(pool))
    seeds = rng.integers(0, 2**31 - 1, size=len(pool))
    bound = min(len(pool), RESAMPLE_FACTOR * need)
    examples: List[AdversarialExample] = []

    def attempt(draw: int) -> Optional[AdversarialExample]:
        return run_attack(net, pool[int(order[draw])], spec, seed=int(seeds[draw]))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        draw = 0
        while draw < bound and len(examples) < need:
            chunk = range(draw, min(bound, draw + max(1, threads)))
            for example in executor.map(attempt, chunk):
                draw += 1
                if example is None:
                    continue
                examples.append(example)
                pbar.update(1)
                if len(examples) == need:
                    break

    if len(examples) < need:
        raise AttackExhaustedError(
            f"Only {len(examples)} of {need} {pool.split.value} images fooled by "
            f"{spec.kind.value} after {draw} draws"
        )
    logger.info("%s: %d/%d %s draws fooled", spec.kind.value, need, draw, pool.split.value)
    return examples


def build_adversarial_set(
    net: Network,
    ds: Dataset,
    spec: AttackSpec,
    n: int,
    seed: int,
    holdout: Optional[Dataset] = None,
    threads: int = 1,
    show_progress: bool = False,
) -> List[AdversarialExample]:
    """
    Collect exactly n successful adversarial examples

    Images are drawn at random; an image the net misclassifies or the attack
    cannot fool is replaced by another random draw, up to 50 draws per
    requested example.

    Args:
        net: Attacked classifier
        ds: Pool to draw from (the train split when holdout is given)
        spec: Attack hyperparameters
        n: Number of examples to return
        seed: Draw-order seed
        holdout: Test split; when given, n is divided between ds and holdout
            by the corpus train/test ratio
        threads: Images attacked concurrently
        show_progress: Show a tqdm bar

    Raises:
        InvalidConfigError: If n < 1
        AttackExhaustedError: If too few images can be fooled
    """
    if n < 1:
        raise InvalidConfigError(f"n must be >= 1, got {n}")

    if holdout is None:
        parts = [(ds, n)]
    else:
        train_n, test_n = sample_counts(ds.source, n)
        parts = [(ds, train_n), (holdout, test_n)]

    rng = np.random.default_rng(seed)
    examples: List[AdversarialExample] = []
    with tqdm(total=n, unit=' adv', desc=spec.kind.value, disable=not show_progress) as pbar:
        for pool, need in parts:
            if need:
                examples.extend(_attack_pool(net, pool, spec, need, rng, threads, pbar))
    return examples
