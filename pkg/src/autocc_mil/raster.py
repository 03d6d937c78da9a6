"""Raster handling: validation, retinal crop detection and red-channel equalization.

A raster is a plain ``numpy`` array of shape ``(height, width, 3)`` and dtype
``uint8`` in RGB order.  Functions here never mutate their inputs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoForeground, OutOfBounds

# Rec.601 luma weights, scaled by 1000 so the threshold test stays integral.
LUMA_WEIGHTS = (299, 587, 114)
DEFAULT_CROP_THRESHOLD = 15


@dataclass(frozen=True)
class CropBox:
    x0: int
    y0: int
    w: int
    h: int

    def as_tuple(self):
        return (self.x0, self.y0, self.w, self.h)


def as_raster(img) -> np.ndarray:
    """Validate ``img`` and return it as a ``(h, w, 3)`` uint8 array."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (h, w, 3) RGB array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("raster must have positive width and height")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 255:
            arr = arr.astype(np.uint8)
        else:
            raise ValueError(f"raster values must be 8-bit, got dtype {arr.dtype}")
    return arr


def red_equalization_lut(red: np.ndarray) -> np.ndarray:
    """Lookup table ``s(v) = round(255 * cdf(v))`` for one red plane.

    Rounding is half-up and done in integer arithmetic so the table is
    bit-exact on every platform.
    """
    counts = np.bincount(red.ravel(), minlength=256).astype(np.int64)
    cum = np.cumsum(counts)
    total = int(cum[-1])
    return ((2 * 255 * cum + total) // (2 * total)).astype(np.uint8)


def equalize_red_channel(img) -> np.ndarray:
    img = as_raster(img)
    out = img.copy()
    lut = red_equalization_lut(img[:, :, 0])
    out[:, :, 0] = lut[img[:, :, 0]]
    return out


def luminance_mask(img, threshold: float) -> np.ndarray:
    img = as_raster(img).astype(np.int32)
    wr, wg, wb = LUMA_WEIGHTS
    lum1000 = wr * img[:, :, 0] + wg * img[:, :, 1] + wb * img[:, :, 2]
    return lum1000 > threshold * 1000


def detect_retina_crop(img, threshold: float = DEFAULT_CROP_THRESHOLD) -> CropBox:
    """Tight bounding box of every pixel whose luminance exceeds ``threshold``."""
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must lie in [0, 255], got {threshold}")
    mask = luminance_mask(img, threshold)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise NoForeground(f"no pixel brighter than luminance {threshold}")
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return CropBox(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def crop(img, box: CropBox) -> np.ndarray:
    img = as_raster(img)
    h, w = img.shape[:2]
    if (box.w <= 0 or box.h <= 0 or box.x0 < 0 or box.y0 < 0
            or box.x0 + box.w > w or box.y0 + box.h > h):
        raise OutOfBounds(f"crop box {box.as_tuple()} exceeds raster {w}x{h}")
    return img[box.y0:box.y0 + box.h, box.x0:box.x0 + box.w].copy()


def preprocess(img, threshold: float = DEFAULT_CROP_THRESHOLD) -> np.ndarray:
    """Crop to the retina, then equalize the red channel of the cropped region."""
    img = as_raster(img)
    return equalize_red_channel(crop(img, detect_retina_crop(img, threshold)))
