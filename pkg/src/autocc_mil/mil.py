"""Multi-class Citation-KNN over bags of instances.

Instances are compared with correlation distance (``1 - pearson``) or plain
euclidean distance; bags with a k-th ranked Hausdorff distance (by default at
full rank, i.e. the max-min Hausdorff distance) or the minimal (min-min)
Hausdorff distance.

The min-min form is kept as an option but is not the default: on cropped
fundus images every bag holds pure-background corner blocks, so the closest
cross-bag instance pair is nearly always background and the distance
collapses towards zero for every pair of images.

A query is labelled by the plurality vote of its ``references`` nearest
training bags plus every training bag that "cites" it, i.e. counts the query
among its own ``citers`` nearest neighbours.
"""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, EmptyBag, ModelTooSmall
from .features import Bag

CORRELATION = "correlation"
EUCLIDEAN = "euclidean"
MIN_HAUSDORFF = "min_hausdorff"
KTH_RANKED = "kth_ranked"

DEFAULT_REFERENCES = 2
DEFAULT_CITERS = 4
# rank >= bag size makes the k-th ranked distance the classical max-min Hausdorff
DEFAULT_RANK = 64


@dataclass(frozen=True)
class DistanceConfig:
    instance_metric: str = CORRELATION
    bag_distance: str = KTH_RANKED
    rank: int = DEFAULT_RANK

    def __post_init__(self):
        if self.instance_metric not in (CORRELATION, EUCLIDEAN):
            raise ValueError(f"unknown instance metric {self.instance_metric!r}")
        if self.bag_distance not in (MIN_HAUSDORFF, KTH_RANKED):
            raise ValueError(f"unknown bag distance {self.bag_distance!r}")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")


# -- instance level -------------------------------------------------------

class _Prepared:
    """Instances preprocessed once for repeated distance queries."""

    def __init__(self, x: np.ndarray, metric: str):
        self.x = np.asarray(x, dtype=np.float64)
        self.metric = metric
        if metric == CORRELATION:
            if self.x.shape[1] < 2:
                raise DimensionMismatch("correlation distance needs at least 2 components")
            centred = self.x - self.x.mean(axis=1, keepdims=True)
            norms = np.sqrt((centred ** 2).sum(axis=1))
            # zero spread, or a spread so small that its norm underflows
            self.constant = (self.x.max(axis=1) == self.x.min(axis=1)) | ~(norms > 0)
            safe = np.where(self.constant, 1.0, norms)
            self.z = centred / safe[:, None]
            self.z[self.constant] = 0.0


def _pairwise(a: _Prepared, b: _Prepared) -> np.ndarray:
    if a.x.shape[1] != b.x.shape[1]:
        raise DimensionMismatch(f"dimensions differ: {a.x.shape[1]} vs {b.x.shape[1]}")
    if a.metric == EUCLIDEAN:
        return cdist(a.x, b.x, "euclidean")
    d = np.clip(1.0 - a.z @ b.z.T, 0.0, 2.0)
    if a.constant.any() or b.constant.any():
        either = a.constant[:, None] | b.constant[None, :]
        ia, ib = np.flatnonzero(a.constant), np.flatnonzero(b.constant)
        both_equal = np.zeros(d.shape, dtype=bool)
        both_equal[np.ix_(ia, ib)] = (a.x[ia][:, None, :] == b.x[ib][None, :, :]).all(axis=2)
        d = np.where(either, np.where(both_equal, 0.0, 2.0), d)
    return d


def pairwise_instance_distances(x, y, metric: str = CORRELATION) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    return _pairwise(_Prepared(x, metric), _Prepared(y, metric))


def instance_distance(x, y, metric: str = CORRELATION) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"dimensions differ: {x.shape} vs {y.shape}")
    return float(pairwise_instance_distances(x, y, metric)[0, 0])


# -- bag level --------------------------------------------------------------

def _kth(values: np.ndarray, rank: int) -> float:
    r = min(rank, values.size)
    return float(np.partition(values, r - 1)[r - 1])


def _directed(d: np.ndarray, cfg: DistanceConfig) -> float:
    """Distance from the row bag to the column bag given their instance table."""
    if cfg.bag_distance == MIN_HAUSDORFF:
        return float(d.min())
    return _kth(d.min(axis=1), cfg.rank)


def _combine(forward: float, backward: float, cfg: DistanceConfig) -> float:
    if cfg.bag_distance == MIN_HAUSDORFF:
        return min(forward, backward)
    return max(forward, backward)


def _check_bag(bag: Bag):
    if len(bag.instances) == 0:
        raise EmptyBag(f"bag {bag.id!r} has no instances")


def bag_distance(a: Bag, b: Bag, cfg: DistanceConfig = DistanceConfig()) -> float:
    _check_bag(a)
    _check_bag(b)
    pa = _Prepared(a.instances, cfg.instance_metric)
    pb = _Prepared(b.instances, cfg.instance_metric)
    # each direction from its own table keeps the result exactly symmetric
    return _combine(_directed(_pairwise(pa, pb), cfg), _directed(_pairwise(pb, pa), cfg), cfg)


class _BagIndex:
    """All training instances stacked, with per-bag offsets."""

    def __init__(self, bags, cfg: DistanceConfig):
        self.cfg = cfg
        self.sizes = np.array([len(b) for b in bags])
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)[:-1]])
        self.stack = _Prepared(np.concatenate([b.instances for b in bags]), cfg.instance_metric)

    def directed_both(self, query: Bag) -> tuple[np.ndarray, np.ndarray]:
        """Directed distances query->bag_j and bag_j->query for every indexed bag."""
        d = _pairwise(_Prepared(query.instances, self.cfg.instance_metric), self.stack)
        row_min = np.minimum.reduceat(d, self.offsets, axis=1)   # (n_query, n_bags)
        if self.cfg.bag_distance == MIN_HAUSDORFF:
            fwd = row_min.min(axis=0)
            return fwd, fwd.copy()
        col_min = d.min(axis=0)
        rank = self.cfg.rank
        fwd = np.array([_kth(row_min[:, j], rank) for j in range(len(self.sizes))])
        bwd = np.array([_kth(col_min[o:o + s], rank)
                        for o, s in zip(self.offsets, self.sizes)])
        return fwd, bwd

    def distances(self, query: Bag) -> np.ndarray:
        fwd, bwd = self.directed_both(query)
        if self.cfg.bag_distance == MIN_HAUSDORFF:
            return np.minimum(fwd, bwd)
        return np.maximum(fwd, bwd)


def bag_distance_matrix(bags, cfg: DistanceConfig = DistanceConfig()) -> np.ndarray:
    """Symmetric matrix of bag distances."""
    for b in bags:
        _check_bag(b)
    index = _BagIndex(bags, cfg)
    directed = np.stack([index.directed_both(b)[0] for b in bags])
    if cfg.bag_distance == MIN_HAUSDORFF:
        out = np.minimum(directed, directed.T)
    else:
        out = np.maximum(directed, directed.T)
    np.fill_diagonal(out, 0.0)
    return out


# -- classifier ------------------------------------------------------------

@dataclass
class Prediction:
    label: str
    votes: dict
    nearest_reference: str
    distance: float
    references: list = field(default_factory=list)
    citers: list = field(default_factory=list)


class TrainedModel:
    """Labelled training bags plus the precomputed training distance matrix."""

    def __init__(self, bags, references: int = DEFAULT_REFERENCES, citers: int = DEFAULT_CITERS,
                 config: DistanceConfig = DistanceConfig(), classes=None):
        bags = list(bags)
        if not bags:
            raise ModelTooSmall("a model needs at least one training bag")
        if references < 1 or citers < 0:
            raise ValueError("references must be >= 1 and citers >= 0")
        labels = [b.label for b in bags]
        if any(lab is None for lab in labels):
            raise ValueError("every training bag needs a label")
        dims = {b.dim for b in bags}
        if len(dims) != 1:
            raise DimensionMismatch(f"training bags have mixed dimensionality {sorted(dims)}")
        if classes is None:
            classes = list(dict.fromkeys(labels))
        elif not set(labels) <= set(classes):
            raise ValueError("training labels fall outside the declared classes")
        self.bags = bags
        self.classes = list(classes)
        self.references = references
        self.citers = citers
        self.config = config
        self.dim = dims.pop()
        self._index = _BagIndex(bags, config)
        self._matrix = None
        self._citer_cutoff = None

    def __len__(self):
        return len(self.bags)

    @property
    def distance_matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = bag_distance_matrix(self.bags, self.config)
        return self._matrix

    def citer_cutoffs(self) -> np.ndarray:
        """Per training bag, the distance of its C-th nearest other training bag.

        A query strictly closer than this cutoff enters that bag's C nearest
        neighbours; on equal distance the training bag keeps its place.
        """
        if self._citer_cutoff is None:
            n = len(self.bags)
            c = self.citers
            cut = np.full(n, np.inf)
            if c > 0 and n - 1 >= c:
                d = self.distance_matrix.copy()
                np.fill_diagonal(d, np.inf)
                cut = np.partition(d, c - 1, axis=1)[:, c - 1]
            elif c == 0:
                cut = np.full(n, -np.inf)
            self._citer_cutoff = cut
        return self._citer_cutoff

    def query_distances(self, query: Bag) -> np.ndarray:
        _check_bag(query)
        if query.dim != self.dim:
            raise DimensionMismatch(f"query has {query.dim} components, model expects {self.dim}")
        return self._index.distances(query)


def rank_neighbors(query: Bag, model: TrainedModel) -> list[tuple[str, float]]:
    d = model.query_distances(query)
    order = np.argsort(d, kind="stable")
    return [(model.bags[i].id, float(d[i])) for i in order]


def classify_citation_knn(query: Bag, model: TrainedModel) -> Prediction:
    if len(model) < model.references:
        raise ModelTooSmall(f"model holds {len(model)} bags, {model.references} references requested")
    d = model.query_distances(query)
    order = np.argsort(d, kind="stable")
    refs = [int(i) for i in order[:model.references]]
    citers = [int(i) for i in np.flatnonzero(d < model.citer_cutoffs())]
    tally = Counter(model.bags[i].label for i in refs)
    tally.update(model.bags[i].label for i in citers)
    best = max(tally.values())
    tied = {lab for lab, n in tally.items() if n == best}
    # tie: the closest bag (references come first in this order) carrying a tied label
    label = next(model.bags[i].label for i in order if model.bags[i].label in tied)
    votes = {c: tally.get(c, 0) for c in model.classes}
    nearest = refs[0]
    return Prediction(label=label, votes=votes, nearest_reference=model.bags[nearest].id,
                      distance=float(d[nearest]),
                      references=[model.bags[i].id for i in refs],
                      citers=[model.bags[i].id for i in citers])


def classify_many(queries, model: TrainedModel) -> list[Prediction]:
    return [classify_citation_knn(q, model) for q in queries]
