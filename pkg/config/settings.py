"""
Configuration settings for the sensitive-pixel defense toolkit
"""

from pathlib import Path
import os
from dotenv import load_dotenv

load_dotenv()


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(value) if value else default


class Settings:
    """Application configuration"""

    # Paths
    BASE_DIR = Path(__file__).parent.parent
    STORAGE_DIR = Path(os.getenv("PIXDEF_STORAGE_DIR", BASE_DIR / "storage"))
    DATA_DIR = STORAGE_DIR / "datasets"
    MODELS_DIR = STORAGE_DIR / "models"
    RESULTS_DIR = STORAGE_DIR / "results"
    MNIST_DIR = Path(os.getenv("PIXDEF_MNIST_DIR", DATA_DIR / "mnist"))
    CIFAR_DIR = Path(os.getenv("PIXDEF_CIFAR_DIR", DATA_DIR / "cifar-10-batches-bin"))

    # MNIST file names (uncompressed IDX)
    MNIST_TRAIN_IMAGES = "train-images-idx3-ubyte"
    MNIST_TRAIN_LABELS = "train-labels-idx1-ubyte"
    MNIST_TEST_IMAGES = "t10k-images-idx3-ubyte"
    MNIST_TEST_LABELS = "t10k-labels-idx1-ubyte"

    # CIFAR-10 binary batches
    CIFAR_TRAIN_BATCHES = [f"data_batch_{i}.bin" for i in range(1, 6)]
    CIFAR_TEST_BATCH = "test_batch.bin"

    # Download sources (fetch helper only; the library never downloads)
    MNIST_BASE_URL = os.getenv(
        "PIXDEF_MNIST_URL", "https://storage.googleapis.com/cvdf-datasets/mnist/"
    )
    CIFAR_URL = os.getenv(
        "PIXDEF_CIFAR_URL", "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"
    )

    # Runtime
    DEFAULT_SEED = _env_int("PIXDEF_SEED", 0)
    THREADS = _env_int("PIXDEF_THREADS", os.cpu_count() or 1)
    LOG_LEVEL = os.getenv("PIXDEF_LOG_LEVEL", "INFO")

    # Images dumped per defense cell when --dump-dir is given
    DUMP_LIMIT = _env_int("PIXDEF_DUMP_LIMIT", 5)

    @classmethod
    def ensure_directories(cls):
        """Create necessary directories if they don't exist"""
        for directory in (cls.STORAGE_DIR, cls.DATA_DIR, cls.MODELS_DIR, cls.RESULTS_DIR):
            directory.mkdir(parents=True, exist_ok=True)
