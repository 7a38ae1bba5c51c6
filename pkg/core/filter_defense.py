"""
Sensitive-point filtering and the end-to-end defense
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from config.constants import DX, DY
from core.network import Network
from core.sensitive_search import ProgressCallback, find_sensitive_points
from data.models import SearchConfig, SearchOutcome, SensitivePoint
from utils.exceptions import PointOutOfBoundsError

logger = logging.getLogger(__name__)

Coordinate = Union[Tuple[int, int], SensitivePoint]


@dataclass(frozen=True)
class DirectionArrays:
    """Row/column offsets of the Moore neighborhood, center excluded"""
    dx: Tuple[int, ...] = DX
    dy: Tuple[int, ...] = DY

    def __post_init__(self):
        offsets = set(zip(self.dx, self.dy))
        if len(self.dx) != 8 or len(offsets) != 8 or (0, 0) in offsets \
                or any(abs(a) > 1 or abs(b) > 1 for a, b in offsets):
            raise ValueError("Direction arrays must list the 8 Moore offsets")

    def offsets(self) -> List[Tuple[int, int]]:
        return list(zip(self.dx, self.dy))


MOORE = DirectionArrays()


@dataclass
class FilteredImage:
    """Filtered pixels plus the coordinates that were rewritten"""
    pixels: np.ndarray
    touched: List[Tuple[int, int]] = field(default_factory=list)


def _as_hwc(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    return img[..., None] if img.ndim == 2 else img


def _coordinate(point: Coordinate) -> Tuple[int, int]:
    if isinstance(point, SensitivePoint):
        return point.x, point.y
    x, y = point
    return int(x), int(y)


def in_bounds_neighbors(height: int, width: int, x: int, y: int,
                        directions: DirectionArrays = MOORE) -> List[Tuple[int, int]]:
    """Neighbor coordinates of (x, y) inside a height x width grid, in direction order"""
    cells = []
    for dx, dy in directions.offsets():
        nx, ny = x + dx, y + dy
        if 0 <= nx < height and 0 <= ny < width:
            cells.append((nx, ny))
    return cells


def neighbor_mean(img: np.ndarray, x: int, y: int,
                  directions: DirectionArrays = MOORE) -> np.ndarray:
    """
    Per-channel mean of the in-bounds neighbors of (x, y)

    Neighbors are summed in direction order with float64 accumulators.
    m is 8 inside the image, 5 on an edge and 3 in a corner. An image with
    no neighbors at all (1 x 1) returns the center value.

    Args:
        img: Image of shape (H, W, C) or (H, W)
        x: Row
        y: Column

    Returns:
        float64 array of shape (C,)

    Raises:
        PointOutOfBoundsError: If (x, y) is outside the image
    """
    img = _as_hwc(img)
    height, width = img.shape[:2]
    if not (0 <= x < height and 0 <= y < width):
        raise PointOutOfBoundsError(f"Point ({x}, {y}) outside {height}x{width} image")

    neighbors = in_bounds_neighbors(height, width, x, y, directions)
    if not neighbors:
        return img[x, y].astype(np.float64)
    total = np.zeros(img.shape[2], dtype=np.float64)
    for nx, ny in neighbors:
        total += img[nx, ny].astype(np.float64)
    return total / len(neighbors)


def filter_points(img: np.ndarray, spc: Iterable[Coordinate],
                  directions: DirectionArrays = MOORE) -> FilteredImage:
    """
    Replace each listed pixel by the mean of its neighbors

    All means are read from the unfiltered image, so the result does not
    depend on the order of spc. Repeated coordinates are filtered once.

    Raises:
        PointOutOfBoundsError: If a coordinate is outside the image
    """
    source = np.asarray(img)
    original = _as_hwc(source)

    touched: List[Tuple[int, int]] = []
    means = []
    for point in spc:
        x, y = _coordinate(point)
        if (x, y) in touched:
            continue
        means.append(neighbor_mean(original, x, y, directions))
        touched.append((x, y))

    out = original.copy()
    for (x, y), mean in zip(touched, means):
        out[x, y] = mean.astype(out.dtype)
    return FilteredImage(pixels=out.reshape(source.shape), touched=touched)


def defend(
    net: Network,
    pixels: np.ndarray,
    cfg: SearchConfig,
    filter_unflipped: bool = True,
    threads: int = 1,
    callback: Optional[ProgressCallback] = None,
) -> Tuple[np.ndarray, int, SearchOutcome]:
    """
    Find the image's sensitive points, smooth them, then classify

    The search protects the image's current prediction. Network parameters
    are only read.

    Args:
        net: Classifier
        pixels: Possibly adversarial image
        cfg: Search hyperparameters (cfg.d = 0 leaves the image unchanged)
        filter_unflipped: Also filter when the search found no label flip
        threads: Workers for fitness batches
        callback: Per-generation progress hook

    Returns:
        Tuple of (defended pixels, predicted label, search outcome)
    """
    pixels = np.asarray(pixels, dtype=np.float32)
    current = net.predict(pixels)
    outcome = find_sensitive_points(net, pixels, current, cfg, callback=callback, threads=threads)

    if outcome.flipped or filter_unflipped:
        defended = filter_points(pixels, outcome.points).pixels
    else:
        defended = pixels
    predicted = net.predict(defended)
    logger.debug("defend: %d -> %d (flipped=%s, %d evaluations)",
                 current, predicted, outcome.flipped, outcome.evaluations)
    return defended, predicted, outcome
