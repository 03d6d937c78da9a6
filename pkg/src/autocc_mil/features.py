"""Per-block color auto-correlogram features and bag assembly.

An image is cut into a ``grid x grid`` tiling of blocks; each block yields one
instance, the 8-neighbour auto-correlogram over ``k`` color bins.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BinOutOfRange, TooSmall
from .quantizer import Codebook, quantize_raster
from .raster import DEFAULT_CROP_THRESHOLD, preprocess

DEFAULT_GRID = 8

# L-infinity distance 1: the eight neighbours of a pixel.
NEIGHBOUR_OFFSETS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]


@dataclass
class Block:
    x0: int
    y0: int
    bins: np.ndarray

    @property
    def w(self) -> int:
        return int(self.bins.shape[1])

    @property
    def h(self) -> int:
        return int(self.bins.shape[0])


@dataclass
class Bag:
    id: str
    instances: np.ndarray
    label: str | None = None

    def __post_init__(self):
        inst = np.asarray(self.instances, dtype=np.float64)
        if inst.ndim != 2 or inst.shape[0] < 1:
            raise ValueError(f"bag {self.id!r} needs a non-empty (n, d) instance array")
        self.instances = inst

    @property
    def dim(self) -> int:
        return int(self.instances.shape[1])

    def __len__(self):
        return int(self.instances.shape[0])


def split_sizes(length: int, parts: int) -> list[int]:
    """Segment lengths: the first ``length % parts`` segments get one extra pixel."""
    base, extra = divmod(length, parts)
    return [base + 1 if i < extra else base for i in range(parts)]


def block_edges(length: int, parts: int) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(split_sizes(length, parts))])


def partition_blocks(q: np.ndarray, grid: int = DEFAULT_GRID) -> list[Block]:
    """Tile ``q`` into ``grid * grid`` blocks in row-major order."""
    h, w = q.shape
    if w < grid or h < grid:
        raise TooSmall(f"{w}x{h} raster cannot hold a {grid}x{grid} block grid")
    xs = block_edges(w, grid)
    ys = block_edges(h, grid)
    return [Block(int(xs[c]), int(ys[r]), q[ys[r]:ys[r + 1], xs[c]:xs[c + 1]])
            for r in range(grid) for c in range(grid)]


def autocc_counts(bins: np.ndarray, k_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer histogram ``h`` and same-bin neighbour counts ``s`` of one block.

    ``s[c]`` sums, over pixels of bin ``c``, the number of in-block 8-neighbours
    that also carry bin ``c``.
    """
    bins = np.asarray(bins)
    if bins.size == 0:
        raise ValueError("empty block")
    if bins.min() < 0 or bins.max() >= k_bins:
        raise BinOutOfRange(f"bin index outside [0, {k_bins})")
    hist = np.bincount(bins.ravel(), minlength=k_bins)
    same = np.zeros(k_bins, dtype=np.int64)
    h, w = bins.shape
    for dy, dx in NEIGHBOUR_OFFSETS:
        src = bins[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
        dst = bins[max(0, dy):h - max(0, -dy), max(0, dx):w - max(0, -dx)]
        same += np.bincount(src[src == dst], minlength=k_bins)
    return same, hist


def normalize_counts(same: np.ndarray, hist: np.ndarray) -> np.ndarray:
    # denominator is the block's own histogram; absent bins stay at 0
    out = np.zeros(same.shape, dtype=np.float64)
    present = hist > 0
    out[present] = same[present] / hist[present]
    return out


def compute_autocc(block, k_bins: int) -> np.ndarray:
    bins = block.bins if isinstance(block, Block) else block
    return normalize_counts(*autocc_counts(bins, k_bins))


def bag_from_quantized(q: np.ndarray, k_bins: int, grid: int = DEFAULT_GRID,
                       id: str = "", label: str | None = None) -> Bag:
    instances = np.stack([compute_autocc(b, k_bins) for b in partition_blocks(q, grid)])
    return Bag(id, instances, label)


def extract_bag(img, cb: Codebook, grid: int = DEFAULT_GRID, id: str = "",
                label: str | None = None, threshold: float = DEFAULT_CROP_THRESHOLD) -> Bag:
    """Crop, equalize, quantize, tile and describe one image."""
    return extract_bag_preprocessed(preprocess(img, threshold), cb, grid, id, label)


def extract_bag_preprocessed(img, cb: Codebook, grid: int = DEFAULT_GRID, id: str = "",
                             label: str | None = None) -> Bag:
    return bag_from_quantized(quantize_raster(img, cb), cb.k, grid, id, label)
