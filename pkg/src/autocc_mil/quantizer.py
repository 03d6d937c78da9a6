"""Color codebook learning (k-means over unique shades) and raster quantization."""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, FormatError, TooFewShades
from .raster import as_raster

CODEBOOK_VERSION = 1
DEFAULT_K = 64
DEFAULT_MAX_ITERS = 100
DEFAULT_TOL = 1e-4


@dataclass
class ShadeSet:
    """Distinct RGB triplets, one row each, in ascending packed-RGB order."""

    shades: np.ndarray

    @property
    def count(self) -> int:
        return int(self.shades.shape[0])


@dataclass
class Codebook:
    centroids: np.ndarray
    training_sse: float = 0.0
    seed: int | None = None
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    shade_count: int | None = None
    # SSE after every assignment step; kept in memory only.
    sse_trace: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 3 or c.shape[0] < 1:
            raise ValueError(f"centroids must be a (k, 3) array, got {c.shape}")
        if c.min() < 0 or c.max() > 255:
            raise ValueError("centroid components must lie in [0, 255]")
        self.centroids = c

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])


def _pack(pixels: np.ndarray) -> np.ndarray:
    p = pixels.astype(np.uint32)
    return (p[:, 0] << 16) | (p[:, 1] << 8) | p[:, 2]


def _unpack(packed: np.ndarray) -> np.ndarray:
    return np.stack([(packed >> 16) & 255, (packed >> 8) & 255, packed & 255], axis=1)


def collect_unique_shades(images) -> ShadeSet:
    packed = []
    for img in images:
        arr = as_raster(img)
        packed.append(np.unique(_pack(arr.reshape(-1, 3))))
    if not packed:
        raise EmptyInput("no images given")
    uniq = np.unique(np.concatenate(packed))
    return ShadeSet(_unpack(uniq).astype(np.float64))


def canonical_order(centroids: np.ndarray) -> np.ndarray:
    """Sort centroids lexicographically by (r, g, b)."""
    order = np.lexsort((centroids[:, 2], centroids[:, 1], centroids[:, 0]))
    return centroids[order]


def _kmeans_pp(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, 3))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            # every remaining point coincides with a chosen center
            idx = int(np.argmax(d2))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _assign(points, centers, chunk=8192):
    # expanded form in cache-sized chunks; exact squared distances recomputed for the winner
    labels = np.empty(points.shape[0], dtype=np.intp)
    c2 = (centers ** 2).sum(axis=1)
    m2 = -2.0 * centers.T
    for i in range(0, points.shape[0], chunk):
        score = points[i:i + chunk] @ m2
        score += c2
        labels[i:i + chunk] = score.argmin(axis=1)
    d2 = ((points - centers[labels]) ** 2).sum(axis=1)
    return labels, d2


def train_codebook(shades: ShadeSet, k: int = DEFAULT_K, seed: int = 0,
                   max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL) -> Codebook:
    """Lloyd k-means on the unweighted unique shades, seeded with k-means++.

    Empty clusters are re-seeded at the point farthest from its nearest
    centroid.  Returns centroids in canonical (r, g, b) order.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    points = np.asarray(shades.shades, dtype=np.float64)
    n = points.shape[0]
    if n < k:
        raise TooFewShades(f"{n} unique shades available, {k} bins requested")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(points, k, rng)
    trace = []
    for _ in range(max_iters):
        labels, d2 = _assign(points, centers)
        trace.append(float(d2.sum()))
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(d2))
            counts[labels[far]] -= 1
            labels[far] = j
            counts[j] = 1
            d2[far] = 0.0
            centers[j] = points[far]
        new = centers.copy()
        filled = counts > 0
        for c in range(3):
            sums = np.bincount(labels, weights=points[:, c], minlength=k)
            new[filled, c] = sums[filled] / counts[filled]
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        if shift < tol:
            break
    _, d2 = _assign(points, centers)
    trace.append(float(d2.sum()))
    centers = np.clip(centers, 0.0, 255.0)
    return Codebook(canonical_order(centers), training_sse=trace[-1], seed=seed,
                    max_iters=max_iters, tol=tol, shade_count=n, sse_trace=trace)


def nearest_centroid(colors: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid for each row of ``colors``; ties go to the lower index."""
    colors = np.asarray(colors, dtype=np.float64)
    best = np.full(colors.shape[0], np.inf)
    idx = np.zeros(colors.shape[0], dtype=np.int32)
    for j, c in enumerate(centroids):
        d = (colors[:, 0] - c[0]) ** 2 + (colors[:, 1] - c[1]) ** 2 + (colors[:, 2] - c[2]) ** 2
        closer = d < best
        best[closer] = d[closer]
        idx[closer] = j
    return idx


def quantize_raster(img, cb: Codebook) -> np.ndarray:
    """Map every pixel to its bin index; returns an ``(h, w)`` int32 grid."""
    img = as_raster(img)
    h, w = img.shape[:2]
    packed = _pack(img.reshape(-1, 3))
    uniq, inverse = np.unique(packed, return_inverse=True)
    bins = nearest_centroid(_unpack(uniq), cb.centroids)
    return bins[inverse.ravel()].reshape(h, w)


def codebook_to_json(cb: Codebook) -> str:
    doc = {
        "version": CODEBOOK_VERSION,
        "k": cb.k,
        "centroids": [[float(v) for v in row] for row in cb.centroids],
        "seed": cb.seed,
        "sse": float(cb.training_sse),
        "max_iters": cb.max_iters,
        "tol": cb.tol,
        "shade_count": cb.shade_count,
    }
    return json.dumps(doc, indent=1) + "\n"


def codebook_from_json(text: str) -> Codebook:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"codebook is not valid JSON: {exc}") from None
    if doc.get("version") != CODEBOOK_VERSION:
        raise FormatError(f"unsupported codebook version {doc.get('version')!r}")
    centroids = np.array(doc["centroids"], dtype=np.float64)
    if centroids.shape != (doc["k"], 3):
        raise FormatError(f"codebook declares k={doc['k']} but holds {centroids.shape[0]} centroids")
    return Codebook(centroids, training_sse=doc["sse"], seed=doc.get("seed"),
                    max_iters=doc.get("max_iters", DEFAULT_MAX_ITERS),
                    tol=doc.get("tol", DEFAULT_TOL), shade_count=doc.get("shade_count"))
