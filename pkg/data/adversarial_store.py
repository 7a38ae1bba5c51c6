"""
Adversarial-set directories

    <dir>/config.json        attack spec, dataset, seed and count
    <dir>/manifest.jsonl     one JSON object per example
    <dir>/tensors/NNNNN.adv  perturbed pixels, raw little-endian float32
    <dir>/tensors/NNNNN.orig original pixels, raw little-endian float32
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from config.constants import DatasetSplit
from data.models import AdversarialExample, AttackSpec, LabeledImage
from utils.exceptions import AdversarialSetError

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.json"
MANIFEST_FILE = "manifest.jsonl"
TENSOR_DIR = "tensors"


def _tensor_paths(directory: Path, position: int) -> Tuple[Path, Path]:
    stem = directory / TENSOR_DIR / f"{position:05d}"
    return stem.with_suffix(".adv"), stem.with_suffix(".orig")


def write_tensor(path: Path, pixels: np.ndarray):
    """Write pixels as raw little-endian float32"""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(pixels, dtype='<f4').tobytes())


def read_tensor(path: Path, shape: tuple) -> np.ndarray:
    """
    Read a raw float32 tensor

    Raises:
        AdversarialSetError: Missing file or wrong size
    """
    if not path.is_file():
        raise AdversarialSetError(f"Tensor file not found: {path}")
    data = path.read_bytes()
    expected = 4 * int(np.prod(shape))
    if len(data) != expected:
        raise AdversarialSetError(f"{path}: {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype='<f4').astype(np.float32).reshape(shape)


def save_adversarial_set(
    examples: List[AdversarialExample],
    directory: str,
    spec: AttackSpec,
    extra: Optional[dict] = None,
) -> Path:
    """
    Write an adversarial set directory

    Args:
        examples: Successful attacks
        directory: Output directory (created if needed)
        spec: Attack that produced the set
        extra: Additional config entries (dataset, model, seed, ...)

    Returns:
        Directory path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    config = {'attack': spec.to_dict(), 'count': len(examples)}
    config.update(extra or {})
    (directory / CONFIG_FILE).write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")

    lines = []
    for position, example in enumerate(examples):
        adv_path, orig_path = _tensor_paths(directory, position)
        write_tensor(adv_path, example.perturbed)
        write_tensor(orig_path, example.original.pixels)
        lines.append(json.dumps(example.manifest_row(position, spec), sort_keys=True))
    (directory / MANIFEST_FILE).write_text("".join(line + "\n" for line in lines))

    logger.info("wrote %d adversarial examples to %s", len(examples), directory)
    return directory


def load_config(directory: str) -> dict:
    """
    Read an adversarial set's config.json

    Raises:
        AdversarialSetError: If missing or malformed
    """
    path = Path(directory) / CONFIG_FILE
    if not path.is_file():
        raise AdversarialSetError(f"Adversarial set config not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise AdversarialSetError(f"{path}: {e}")


def load_adversarial_set(directory: str) -> Tuple[List[AdversarialExample], AttackSpec]:
    """
    Read an adversarial set directory

    Returns:
        Tuple of (examples in manifest order, attack spec)

    Raises:
        AdversarialSetError: Missing files or malformed manifest
    """
    directory = Path(directory)
    config = load_config(directory)
    manifest = directory / MANIFEST_FILE
    if not manifest.is_file():
        raise AdversarialSetError(f"Manifest not found: {manifest}")

    examples = []
    for line_number, line in enumerate(manifest.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            shape = tuple(row['shape'])
            position = row['index']
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise AdversarialSetError(f"{manifest}:{line_number}: {e}")

        adv_path, orig_path = _tensor_paths(directory, position)
        split = row.get('origin_split')
        original = LabeledImage(
            pixels=read_tensor(orig_path, shape),
            label=row['true_label'],
            split=DatasetSplit(split) if split else None,
            index=row.get('source_index'),
        )
        examples.append(AdversarialExample(
            original=original,
            perturbed=read_tensor(adv_path, shape),
            predicted_label=row['predicted_label'],
            true_label=row['true_label'],
            l0=row['l0'],
            l2=row['l2'],
            linf=row['linf'],
            seed=row.get('seed', 0),
        ))

    if len(examples) != config.get('count', len(examples)):
        raise AdversarialSetError(
            f"{manifest}: {len(examples)} entries, config says {config['count']}"
        )
    return examples, AttackSpec.from_dict(config['attack'])
