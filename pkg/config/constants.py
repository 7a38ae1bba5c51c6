"""
Constants for the sensitive-pixel defense toolkit
"""

from enum import Enum


class AttackKind(Enum):
    """Gradient attacks used to build adversarial sets"""
    FGSM = "fgsm"
    BIM = "bim"
    PGD = "pgd"


class DatasetSource(Enum):
    """Supported image corpora"""
    MNIST = "mnist"
    CIFAR10 = "cifar10"


class DatasetSplit(Enum):
    """Which half of a corpus an image came from"""
    TRAIN = "train"
    TEST = "test"


class ReportFormat(Enum):
    """Defense report output formats"""
    JSON = "json"
    CSV = "csv"


NUM_CLASSES = 10

# IDX format
IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
IDX_IMAGE_HEADER_SIZE = 16
IDX_LABEL_HEADER_SIZE = 8

# CIFAR-10 binary format: 1 label byte + 3072 channel-planar pixel bytes
CIFAR_IMAGE_SIZE = 32
CIFAR_RECORD_SIZE = 1 + 3 * CIFAR_IMAGE_SIZE * CIFAR_IMAGE_SIZE

# Adversarial-set split ratios (train part, test part) out of 10000 samples
SAMPLE_RATIOS = {
    DatasetSource.MNIST: (8571, 1429),
    DatasetSource.CIFAR10: (8333, 1667),
}

# Model file
MODEL_MAGIC = b"SPIXNN1"

# Moore neighborhood, row-major, center excluded
DX = (-1, -1, -1, 0, 0, 1, 1, 1)
DY = (-1, 0, 1, -1, 1, -1, 0, 1)

# Differential evolution defaults
DEFAULT_POP_SIZE = 400
DEFAULT_ALPHA = 0.5
DEFAULT_CR = 0.8
DEFAULT_MAX_ITER = 100
DEFAULT_D = 10
MAX_CHANNEL_VALUE = 255

# Attack defaults (normalized [0, 1] pixel space)
FGSM_DEFAULT_EPSILON = 0.55
BIM_DEFAULT_EPSILON = 0.03
BIM_DEFAULT_ITERATIONS = 50
BIM_STEP_FACTOR = 2.5
PGD_DEFAULT_EPSILON = 0.03
PGD_DEFAULT_ITERATIONS = 50
PGD_STEP_FRACTION = 0.4          # 0.012 at eps = 0.03

ATTACK_DEFAULT_EPSILON = {
    AttackKind.FGSM: FGSM_DEFAULT_EPSILON,
    AttackKind.BIM: BIM_DEFAULT_EPSILON,
    AttackKind.PGD: PGD_DEFAULT_EPSILON,
}

# Resample bound when building adversarial sets: draws per requested example
RESAMPLE_FACTOR = 50

# PGD schedule search
PGD_TUNE_EPS_STEP = 0.001
PGD_TUNE_ITER_STEP = 10

# Evaluation protocol
DEFAULT_D_VALUES = (1, 10, 50, 100)
DEFAULT_RUNS = 3
DEFAULT_N_ADVERSARIAL = 100

# Training defaults (LeNet-lite on an MNIST subset)
DEFAULT_EPOCHS = 10
DEFAULT_LEARNING_RATE = 0.05
DEFAULT_BATCH_SIZE = 32
DEFAULT_TRAIN_SUBSET = 10000
DEFAULT_TEST_SUBSET = 1000

# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

# Report CSV columns
REPORT_CSV_COLUMNS = ["dataset", "attack", "d", "run_index", "rate", "is_mean"]
