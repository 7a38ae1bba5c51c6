"""
Download MNIST (IDX) and CIFAR-10 (binary) into the storage directory

The library itself never touches the network; this helper only fetches
and unpacks the standard files.
"""

import argparse
import gzip
import shutil
import sys
import tarfile
from pathlib import Path

import requests
from tqdm import tqdm

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from config.settings import Settings


def download_file(url: str, output_path: Path, force: bool = False) -> Path:
    """
    Stream a URL to disk with a progress bar

    Args:
        url: Source URL
        output_path: Destination file
        force: Download even if the file already exists

    Returns:
        Path to downloaded file
    """
    if output_path.exists() and not force:
        print(f"Already present: {output_path}")
        return output_path

    output_path.parent.mkdir(parents=True, exist_ok=True)
    print(f"Downloading {url}")

    try:
        response = requests.get(url, stream=True, timeout=60)
        response.raise_for_status()
        total_size = int(response.headers.get('content-length', 0))

        with open(output_path, 'wb') as f:
            with tqdm(total=total_size, unit='B', unit_scale=True, unit_divisor=1024) as pbar:
                for chunk in response.iter_content(chunk_size=8192):
                    if chunk:
                        f.write(chunk)
                        pbar.update(len(chunk))
        return output_path

    except requests.RequestException as e:
        if output_path.exists():
            output_path.unlink()
        print(f"\n✗ Download failed: {e}")
        sys.exit(1)
    except KeyboardInterrupt:
        if output_path.exists():
            output_path.unlink()
            print("Partial file deleted.")
        print("\n✗ Download cancelled by user")
        sys.exit(1)


def download_mnist(force: bool = False) -> Path:
    """Fetch and gunzip the four MNIST IDX files into Settings.MNIST_DIR"""
    names = [
        Settings.MNIST_TRAIN_IMAGES,
        Settings.MNIST_TRAIN_LABELS,
        Settings.MNIST_TEST_IMAGES,
        Settings.MNIST_TEST_LABELS,
    ]
    for name in names:
        target = Settings.MNIST_DIR / name
        if target.exists() and not force:
            print(f"Already present: {target}")
            continue
        archive = download_file(Settings.MNIST_BASE_URL + name + ".gz",
                                Settings.MNIST_DIR / f"{name}.gz", force)
        with gzip.open(archive, 'rb') as src, open(target, 'wb') as dst:
            shutil.copyfileobj(src, dst)
        archive.unlink()
    print(f"✓ MNIST ready in {Settings.MNIST_DIR}")
    return Settings.MNIST_DIR


def download_cifar10(force: bool = False) -> Path:
    """Fetch and unpack the CIFAR-10 binary batches into Settings.CIFAR_DIR"""
    if (Settings.CIFAR_DIR / Settings.CIFAR_TEST_BATCH).exists() and not force:
        print(f"Already present: {Settings.CIFAR_DIR}")
        return Settings.CIFAR_DIR

    archive = download_file(Settings.CIFAR_URL, Settings.DATA_DIR / "cifar-10-binary.tar.gz", force)
    with tarfile.open(archive, 'r:gz') as tar:
        for member in tar.getmembers():
            name = Path(member.name).name
            if member.isfile() and name.endswith('.bin'):
                with tar.extractfile(member) as src, open(Settings.CIFAR_DIR / name, 'wb') as dst:
                    shutil.copyfileobj(src, dst)
    archive.unlink()
    print(f"✓ CIFAR-10 ready in {Settings.CIFAR_DIR}")
    return Settings.CIFAR_DIR


def main():
    """Main entry point"""
    parser = argparse.ArgumentParser(description="Download MNIST / CIFAR-10")
    parser.add_argument('--dataset', choices=['mnist', 'cifar10', 'all'], default='mnist')
    parser.add_argument('--force', '-f', action='store_true', help='download again')
    args = parser.parse_args()

    Settings.ensure_directories()
    Settings.CIFAR_DIR.mkdir(parents=True, exist_ok=True)
    Settings.MNIST_DIR.mkdir(parents=True, exist_ok=True)

    if args.dataset in ('mnist', 'all'):
        download_mnist(args.force)
    if args.dataset in ('cifar10', 'all'):
        download_cifar10(args.force)


if __name__ == "__main__":
    main()
