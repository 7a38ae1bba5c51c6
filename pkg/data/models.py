"""
Data models for the sensitive-pixel defense toolkit
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np

from config.constants import (
    AttackKind,
    DatasetSource,
    DatasetSplit,
    BIM_STEP_FACTOR,
    DEFAULT_ALPHA,
    DEFAULT_CR,
    DEFAULT_D,
    DEFAULT_D_VALUES,
    DEFAULT_MAX_ITER,
    DEFAULT_N_ADVERSARIAL,
    DEFAULT_POP_SIZE,
    DEFAULT_RUNS,
    MAX_CHANNEL_VALUE,
    PGD_STEP_FRACTION,
)
from utils.exceptions import InvalidConfigError


@dataclass
class LabeledImage:
    """A single H x W x C image in [0, 1] with its ground-truth label"""
    pixels: np.ndarray                 # float32 (H, W, C)
    label: int
    split: Optional[DatasetSplit] = None
    index: Optional[int] = None        # position in the source file

    @property
    def shape(self) -> tuple:
        return self.pixels.shape


@dataclass
class Dataset:
    """
    Immutable collection of images from one corpus split

    Raw bytes are kept so the source file contents can be reproduced;
    normalized pixels are derived on first access.
    """
    raw: np.ndarray                    # uint8 (N, H, W, C)
    labels: np.ndarray                 # uint8 (N,)
    source: DatasetSource
    split: DatasetSplit = DatasetSplit.TRAIN
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.raw.ndim != 4:
            raise ValueError(f"Dataset images must be (N, H, W, C), got shape {self.raw.shape}")
        if len(self.raw) != len(self.labels):
            raise ValueError(
                f"Image count {len(self.raw)} does not match label count {len(self.labels)}"
            )
        if self.indices is None:
            self.indices = np.arange(len(self.raw), dtype=np.int64)
        self.raw.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return len(self.raw)

    def __getitem__(self, position: int) -> LabeledImage:
        return LabeledImage(
            pixels=self.pixels[position],
            label=int(self.labels[position]),
            split=self.split,
            index=int(self.indices[position]),
        )

    @property
    def image_shape(self) -> tuple:
        return tuple(self.raw.shape[1:])

    @property
    def channel_count(self) -> int:
        return self.raw.shape[3]

    @cached_property
    def pixels(self) -> np.ndarray:
        """Pixels scaled to [0, 1] as float32"""
        scaled = self.raw.astype(np.float32) / np.float32(MAX_CHANNEL_VALUE)
        scaled.setflags(write=False)
        return scaled

    def subset(self, positions: Sequence[int]) -> "Dataset":
        """Dataset restricted to the given positions (order kept)"""
        positions = np.asarray(positions, dtype=np.int64)
        return Dataset(
            raw=self.raw[positions],
            labels=self.labels[positions],
            source=self.source,
            split=self.split,
            indices=self.indices[positions],
        )


@dataclass
class AttackSpec:
    """Hyperparameters of one gradient attack"""
    kind: AttackKind
    epsilon: float
    iterations: int = 1
    step_size: Optional[float] = None
    random_start: Optional[bool] = None      # defaults to True for PGD only
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.kind, str):
            self.kind = AttackKind(self.kind)
        if self.random_start is None:
            self.random_start = self.kind == AttackKind.PGD
        if not self.epsilon > 0:
            raise InvalidConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.kind == AttackKind.FGSM:
            self.iterations = 1
        elif self.iterations < 1:
            raise InvalidConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.step_size is None:
            self.step_size = self.default_step_size(self.kind, self.epsilon, self.iterations)
        if not 0 < self.step_size <= self.epsilon:
            raise InvalidConfigError(
                f"step_size must be in (0, epsilon={self.epsilon}], got {self.step_size}"
            )

    @staticmethod
    def default_step_size(kind: AttackKind, epsilon: float, iterations: int) -> float:
        """Per-iteration step when none is given"""
        if kind == AttackKind.BIM:
            return min(epsilon, BIM_STEP_FACTOR * epsilon / iterations)
        if kind == AttackKind.PGD:
            return PGD_STEP_FRACTION * epsilon
        return epsilon

    def to_dict(self) -> dict:
        return {
            'kind': self.kind.value,
            'epsilon': self.epsilon,
            'iterations': self.iterations,
            'step_size': self.step_size,
            'random_start': self.random_start,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'AttackSpec':
        return cls(
            kind=AttackKind(data['kind']),
            epsilon=data['epsilon'],
            iterations=data.get('iterations', 1),
            step_size=data.get('step_size'),
            random_start=data.get('random_start'),
            seed=data.get('seed', 0),
        )


@dataclass
class AdversarialExample:
    """A successful attack on a correctly-classified image"""
    original: LabeledImage
    perturbed: np.ndarray              # float32, same shape as original
    predicted_label: int
    true_label: int
    l0: float
    l2: float
    linf: float
    seed: int = 0

    def manifest_row(self, position: int, spec: AttackSpec) -> dict:
        """JSON-lines manifest entry (tensors are stored separately)"""
        return {
            'index': position,
            'true_label': self.true_label,
            'predicted_label': self.predicted_label,
            'l0': self.l0,
            'l2': self.l2,
            'linf': self.linf,
            'seed': self.seed,
            'origin_split': self.original.split.value if self.original.split else None,
            'source_index': self.original.index,
            'shape': list(self.perturbed.shape),
            'spec': spec.to_dict(),
        }


@dataclass
class SensitivePoint:
    """One pixel to overwrite: coordinates plus 0-255 channel values"""
    x: int                             # row
    y: int                             # column
    values: tuple

    def to_dict(self) -> dict:
        return {'x': self.x, 'y': self.y, 'values': list(self.values)}

    @classmethod
    def from_dict(cls, data: dict) -> 'SensitivePoint':
        return cls(x=data['x'], y=data['y'], values=tuple(data['values']))


@dataclass
class Candidate:
    """
    One differential-evolution individual

    genes has shape (d, 2 + C): row, column, then C channel values. Genes are
    real-valued; they are rounded only when decoded into points.
    """
    genes: np.ndarray
    fitness: Optional[float] = None

    @property
    def d(self) -> int:
        return self.genes.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.genes.reshape(-1)

    @property
    def points(self) -> List[SensitivePoint]:
        rounded = np.rint(self.genes)
        rounded[:, 2:] = np.clip(rounded[:, 2:], 0, MAX_CHANNEL_VALUE)
        rounded = rounded.astype(np.int64)
        return [
            SensitivePoint(x=int(row[0]), y=int(row[1]), values=tuple(int(v) for v in row[2:]))
            for row in rounded
        ]

    def with_genes(self, genes: np.ndarray) -> 'Candidate':
        return Candidate(genes=genes.reshape(self.genes.shape), fitness=None)


@dataclass
class SearchConfig:
    """Differential-evolution hyperparameters for the sensitive-point search"""
    d: int = DEFAULT_D
    pop_size: int = DEFAULT_POP_SIZE
    alpha: float = DEFAULT_ALPHA
    cr: float = DEFAULT_CR
    max_iter: int = DEFAULT_MAX_ITER
    seed: int = 0

    def __post_init__(self):
        if self.d < 0:
            raise InvalidConfigError(f"d must be >= 0, got {self.d}")
        if self.pop_size < 1:
            raise InvalidConfigError(f"pop_size must be >= 1, got {self.pop_size}")
        if self.alpha < 0:
            raise InvalidConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 <= self.cr <= 1.0:
            raise InvalidConfigError(f"cr must be in [0, 1], got {self.cr}")
        if self.max_iter < 0:
            raise InvalidConfigError(f"max_iter must be >= 0, got {self.max_iter}")

    def replace(self, **changes) -> 'SearchConfig':
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            'd': self.d,
            'pop_size': self.pop_size,
            'alpha': self.alpha,
            'cr': self.cr,
            'max_iter': self.max_iter,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SearchConfig':
        return cls(**{key: data[key] for key in cls().to_dict() if key in data})


@dataclass
class SearchOutcome:
    """Result of one sensitive-point search"""
    points: List[SensitivePoint]
    flipped: bool
    generations_used: int
    best_fitness: float
    evaluations: int = 0
    predicted_label: Optional[int] = None   # label after applying points
    fitness_history: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'points': [p.to_dict() for p in self.points],
            'flipped': self.flipped,
            'generations_used': self.generations_used,
            'best_fitness': self.best_fitness,
            'evaluations': self.evaluations,
            'predicted_label': self.predicted_label,
            'fitness_history': list(self.fitness_history),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SearchOutcome':
        return cls(
            points=[SensitivePoint.from_dict(p) for p in data['points']],
            flipped=data['flipped'],
            generations_used=data['generations_used'],
            best_fitness=data['best_fitness'],
            evaluations=data.get('evaluations', 0),
            predicted_label=data.get('predicted_label'),
            fitness_history=data.get('fitness_history', []),
        )


@dataclass
class ExperimentSpec:
    """One defense sweep over d values with repeated seeded runs"""
    dataset: DatasetSource
    attack: AttackSpec
    model_path: str
    adversarial_dir: Optional[str] = None
    d_values: List[int] = field(default_factory=lambda: list(DEFAULT_D_VALUES))
    n_adversarial: int = DEFAULT_N_ADVERSARIAL
    runs: int = DEFAULT_RUNS
    seeds: Optional[List[int]] = None
    search: SearchConfig = field(default_factory=SearchConfig)
    measure_clean: bool = True
    filter_unflipped: bool = True
    threads: int = 1

    def __post_init__(self):
        if isinstance(self.dataset, str):
            self.dataset = DatasetSource(self.dataset)
        if self.runs < 1:
            raise InvalidConfigError(f"runs must be >= 1, got {self.runs}")
        if not self.d_values:
            raise InvalidConfigError("d_values must not be empty")
        if any(b <= a for a, b in zip(self.d_values, self.d_values[1:])):
            raise InvalidConfigError(f"d_values must be strictly increasing, got {self.d_values}")
        if self.seeds is None:
            self.seeds = list(range(self.runs))
        if len(self.seeds) != self.runs:
            raise InvalidConfigError(
                f"Expected {self.runs} seeds (one per run), got {len(self.seeds)}"
            )
        if self.n_adversarial < 1:
            raise InvalidConfigError(f"n_adversarial must be >= 1, got {self.n_adversarial}")

    def to_dict(self) -> dict:
        return {
            'dataset': self.dataset.value,
            'attack': self.attack.to_dict(),
            'model_path': self.model_path,
            'adversarial_dir': self.adversarial_dir,
            'd_values': list(self.d_values),
            'n_adversarial': self.n_adversarial,
            'runs': self.runs,
            'seeds': list(self.seeds),
            'search': self.search.to_dict(),
            'measure_clean': self.measure_clean,
            'filter_unflipped': self.filter_unflipped,
            'threads': self.threads,
        }


@dataclass
class DefenseCell:
    """Defense success rates for one d value"""
    d: int
    runs: List[float]
    mean: float
    seeds: List[int]
    clean_accuracy: Optional[float] = None
    flip_rate: float = 0.0
    mean_evaluations: float = 0.0
    seconds_per_image: float = 0.0

    def to_dict(self) -> dict:
        return {
            'd': self.d,
            'runs': list(self.runs),
            'mean': self.mean,
            'clean_accuracy': self.clean_accuracy,
            'seeds': list(self.seeds),
            'flip_rate': self.flip_rate,
            'mean_evaluations': self.mean_evaluations,
            'seconds_per_image': self.seconds_per_image,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'DefenseCell':
        return cls(
            d=data['d'],
            runs=list(data['runs']),
            mean=data['mean'],
            seeds=list(data['seeds']),
            clean_accuracy=data.get('clean_accuracy'),
            flip_rate=data.get('flip_rate', 0.0),
            mean_evaluations=data.get('mean_evaluations', 0.0),
            seconds_per_image=data.get('seconds_per_image', 0.0),
        )


# Fields that vary between otherwise identical runs
_TIMING_FIELDS = ('generated_at', 'wall_time')


@dataclass
class DefenseReport:
    """Per-d defense success rates with run metadata"""
    dataset: str
    model: str
    attack: dict
    cells: List[DefenseCell]
    n_adversarial: int
    undefended_accuracy: float = 0.0
    config: dict = field(default_factory=dict)
    generated_at: str = ""
    wall_time: float = 0.0

    def cell(self, d: int) -> DefenseCell:
        for cell in self.cells:
            if cell.d == d:
                return cell
        raise KeyError(f"No cell for d={d}")

    def to_dict(self) -> dict:
        return {
            'dataset': self.dataset,
            'model': self.model,
            'attack': dict(self.attack),
            'cells': [cell.to_dict() for cell in self.cells],
            'n_adversarial': self.n_adversarial,
            'undefended_accuracy': self.undefended_accuracy,
            'config': dict(self.config),
            'generated_at': self.generated_at,
            'wall_time': self.wall_time,
        }

    def body(self) -> dict:
        """to_dict() without wall-clock fields, for determinism checks"""
        data = self.to_dict()
        for key in _TIMING_FIELDS:
            data.pop(key)
        for cell in data['cells']:
            cell.pop('seconds_per_image')
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'DefenseReport':
        return cls(
            dataset=data['dataset'],
            model=data['model'],
            attack=dict(data['attack']),
            cells=[DefenseCell.from_dict(c) for c in data['cells']],
            n_adversarial=data['n_adversarial'],
            undefended_accuracy=data.get('undefended_accuracy', 0.0),
            config=dict(data.get('config', {})),
            generated_at=data.get('generated_at', ""),
            wall_time=data.get('wall_time', 0.0),
        )


@dataclass
class SweepPoint:
    """Fooling rate of one attack setting on a fixed sample"""
    epsilon: float
    iterations: int
    fooled: int
    attempted: int

    @property
    def fooling_rate(self) -> float:
        return self.fooled / self.attempted if self.attempted else 0.0

    def to_dict(self) -> dict:
        return {
            'epsilon': self.epsilon,
            'iterations': self.iterations,
            'fooled': self.fooled,
            'attempted': self.attempted,
            'fooling_rate': self.fooling_rate,
        }
