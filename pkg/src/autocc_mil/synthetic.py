"""Fundus-like synthetic rasters with locally planted class evidence.

Every image is a noisy, red-saturated disk on a dark background.  ``normal``
images carry nothing else.  ``npdr`` images get small dark-red dot clusters
and ``pdr`` images get thin branching bright-red curves; either kind is
confined to a few blocks of the 8x8 grid laid over the disk's bounding box,
so the rest of the image comes from exactly the same generator as a normal
image.  The generator records which blocks received evidence.
"""

from dataclasses import dataclass

import numpy as np

from .evaluation import derive_seed
from .features import DEFAULT_GRID, block_edges
from .raster import CropBox

CLASSES = ("normal", "npdr", "pdr")
DEFAULT_IMAGE_SIZE = 128

BACKGROUND_MAX = 6          # per channel; keeps luminance below the crop threshold
DISK_BASE = (172.0, 62.0, 26.0)
DISK_VIGNETTE = (48.0, 22.0, 10.0)
DISK_NOISE = (5.0, 6.0, 4.0)
DOT_COLOR = (112.0, 18.0, 52.0)
VESSEL_COLOR = (250.0, 8.0, 8.0)
EVIDENCE_NOISE = 3.0


@dataclass
class SyntheticImage:
    raster: np.ndarray
    label: str
    evidence_blocks: list          # row-major block indices holding planted evidence
    seed: int


@dataclass(frozen=True)
class Geometry:
    size: int
    cx: float
    cy: float
    radius: float
    box: CropBox
    xs: np.ndarray
    ys: np.ndarray
    grid: int

    def block_rect(self, index: int) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) in raster coordinates, end-exclusive."""
        r, c = divmod(index, self.grid)
        return (self.box.x0 + int(self.xs[c]), self.box.y0 + int(self.ys[r]),
                self.box.x0 + int(self.xs[c + 1]), self.box.y0 + int(self.ys[r + 1]))

    def interior_blocks(self, margin: float = 0.0) -> list[int]:
        """Blocks lying entirely inside the disk."""
        out = []
        for i in range(self.grid * self.grid):
            x0, y0, x1, y1 = self.block_rect(i)
            corners = [(x0, y0), (x1 - 1, y0), (x0, y1 - 1), (x1 - 1, y1 - 1)]
            if all((x - self.cx) ** 2 + (y - self.cy) ** 2 <= (self.radius - margin) ** 2
                   for x, y in corners):
                out.append(i)
        return out


def geometry(size: int = DEFAULT_IMAGE_SIZE, grid: int = DEFAULT_GRID) -> Geometry:
    c = (size - 1) / 2.0
    radius = 0.46 * size
    yy, xx = np.mgrid[0:size, 0:size]
    inside = (xx - c) ** 2 + (yy - c) ** 2 <= radius ** 2
    rows = np.flatnonzero(inside.any(axis=1))
    cols = np.flatnonzero(inside.any(axis=0))
    box = CropBox(int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))
    return Geometry(size, c, c, radius, box, block_edges(box.w, grid), block_edges(box.h, grid), grid)


def _disk_mask(geo: Geometry) -> np.ndarray:
    yy, xx = np.mgrid[0:geo.size, 0:geo.size]
    return (xx - geo.cx) ** 2 + (yy - geo.cy) ** 2 <= geo.radius ** 2


def render_normal(geo: Geometry, rng: np.random.Generator) -> np.ndarray:
    """Background plus vignetted disk; no evidence."""
    size = geo.size
    img = rng.integers(0, BACKGROUND_MAX + 1, size=(size, size, 3)).astype(np.float64)
    yy, xx = np.mgrid[0:size, 0:size]
    rho2 = ((xx - geo.cx) ** 2 + (yy - geo.cy) ** 2) / geo.radius ** 2
    mask = rho2 <= 1.0
    shade = 1.0 - rho2
    for ch in range(3):
        plane = DISK_BASE[ch] + DISK_VIGNETTE[ch] * shade + rng.normal(0.0, DISK_NOISE[ch], (size, size))
        img[:, :, ch] = np.where(mask, plane, img[:, :, ch])
    return img


def _paint(img, rng, mask, color):
    n = int(mask.sum())
    for ch in range(3):
        img[:, :, ch][mask] = color[ch] + rng.normal(0.0, EVIDENCE_NOISE, n)


def _disk_stamp(shape, cx, cy, r):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r + 0.5


def plant_dots(img, geo, rng, blocks, n_clusters):
    """Dark-red dot clusters (microaneurysm-like), kept inside their blocks."""
    mask = np.zeros(img.shape[:2], dtype=bool)
    owner = [blocks[i % len(blocks)] for i in range(n_clusters)]
    for b in owner:
        x0, y0, x1, y1 = geo.block_rect(b)
        cx = rng.uniform(x0 + 3, x1 - 4)
        cy = rng.uniform(y0 + 3, y1 - 4)
        for _ in range(rng.integers(2, 5)):
            dx, dy = rng.normal(0.0, 1.5, 2)
            r = rng.choice([1.0, 1.5])
            stamp = _disk_stamp(img.shape, cx + dx, cy + dy, r)
            clip = np.zeros_like(stamp)
            clip[y0 + 1:y1 - 1, x0 + 1:x1 - 1] = True
            mask |= stamp & clip
    _paint(img, rng, mask, DOT_COLOR)
    return mask


def plant_vessels(img, geo, rng, blocks):
    """Thin branching bright-red curves (neovascularization-like), one tree per block."""
    mask = np.zeros(img.shape[:2], dtype=bool)
    for b in blocks:
        x0, y0, x1, y1 = geo.block_rect(b)
        clip = np.zeros(img.shape[:2], dtype=bool)
        clip[y0 + 1:y1 - 1, x0 + 1:x1 - 1] = True
        todo = [(rng.uniform(x0 + 2, x1 - 3), rng.uniform(y0 + 2, y1 - 3),
                 rng.uniform(0, 2 * np.pi), 3)]
        while todo:
            x, y, ang, depth = todo.pop()
            steps = int(rng.integers(6, 12))
            for _ in range(steps):
                ang += rng.normal(0.0, 0.35)
                x += np.cos(ang)
                y += np.sin(ang)
                xi, yi = int(round(x)), int(round(y))
                if not (x0 + 1 <= xi < x1 - 1 and y0 + 1 <= yi < y1 - 1):
                    break
                mask[yi:yi + 2, xi:xi + 2] = True
                if depth > 1 and rng.random() < 0.12:
                    todo.append((x, y, ang + rng.choice([-1.0, 1.0]) * rng.uniform(0.6, 1.2), depth - 1))
        mask &= clip
    _paint(img, rng, mask, VESSEL_COLOR)
    return mask


def generate_image(label: str, seed: int, size: int = DEFAULT_IMAGE_SIZE,
                   grid: int = DEFAULT_GRID) -> SyntheticImage:
    if label not in CLASSES:
        raise ValueError(f"unknown synthetic class {label!r}")
    geo = geometry(size, grid)
    rng = np.random.default_rng(seed)
    img = render_normal(geo, rng)
    candidates = geo.interior_blocks(margin=1.0)
    blocks = []
    if label == "npdr":
        blocks = sorted(int(b) for b in rng.choice(candidates, size=int(rng.integers(1, 4)), replace=False))
        plant_dots(img, geo, rng, blocks, int(rng.integers(3, 9)))
    elif label == "pdr":
        blocks = sorted(int(b) for b in rng.choice(candidates, size=int(rng.integers(2, 5)), replace=False))
        plant_vessels(img, geo, rng, blocks)
    raster = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return SyntheticImage(raster, label, blocks, seed)


def gen_synthetic(per_class: int, seed: int = 0, image_size: int = DEFAULT_IMAGE_SIZE,
                  grid: int = DEFAULT_GRID) -> list[SyntheticImage]:
    """``per_class`` images of each class, interleaved normal, npdr, pdr, normal, ..."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if image_size < 64:
        raise ValueError("image_size must be >= 64")
    out = []
    for i in range(per_class):
        for label in CLASSES:
            out.append(generate_image(label, derive_seed(seed, f"synthetic/{label}/{i}"), image_size, grid))
    return out


def replace_blocks(target: np.ndarray, source: np.ndarray, blocks, size: int = DEFAULT_IMAGE_SIZE,
                   grid: int = DEFAULT_GRID) -> np.ndarray:
    """Copy the given grid blocks of ``source`` into a copy of ``target``."""
    geo = geometry(size, grid)
    out = target.copy()
    for b in blocks:
        x0, y0, x1, y1 = geo.block_rect(b)
        out[y0:y1, x0:x1] = source[y0:y1, x0:x1]
    return out
