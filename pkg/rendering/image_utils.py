"""
Image utility functions: PNG dumps of original, adversarial and defended images
"""

from pathlib import Path

import numpy as np
from PIL import Image

DEFAULT_SCALE = 4


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """[0, 1] float pixels (H, W, C) -> uint8 array Pillow accepts"""
    array = np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * 255), 0, 255).astype(np.uint8)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[..., 0]
    return array


def save_png(pixels: np.ndarray, path: str, scale: int = DEFAULT_SCALE) -> Path:
    """
    Write an image as PNG, enlarged with nearest-neighbor sampling

    Args:
        pixels: Image of shape (H, W, C) or (H, W) in [0, 1]
        path: Output file
        scale: Integer magnification (28 x 28 digits are tiny otherwise)

    Returns:
        Path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image = Image.fromarray(to_uint8(pixels))
    if scale > 1:
        image = image.resize((image.width * scale, image.height * scale), Image.NEAREST)
    image.save(path, format='PNG')
    return path


def save_triptych(original: np.ndarray, adversarial: np.ndarray, defended: np.ndarray,
                  path: str, scale: int = DEFAULT_SCALE) -> Path:
    """Original, adversarial and defended images side by side in one PNG"""
    gap = np.ones((original.shape[0], 1) + original.shape[2:], dtype=np.float32)
    row = np.concatenate([original, gap, adversarial, gap, defended], axis=1)
    return save_png(row, path, scale)


def format_file_size(size_bytes: int) -> str:
    """
    Format file size in human-readable format

    Args:
        size_bytes: Size in bytes

    Returns:
        Formatted string (e.g., "1.5 MB")
    """
    for unit in ['B', 'KB', 'MB', 'GB']:
        if size_bytes < 1024.0:
            return f"{size_bytes:.1f} {unit}"
        size_bytes /= 1024.0

    return f"{size_bytes:.1f} TB"
