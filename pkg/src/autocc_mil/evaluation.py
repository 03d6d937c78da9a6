"""Repeated stratified k-fold cross-validation, confusion matrices and reports."""

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ClassTooSmall, UnknownClass
from .mil import DEFAULT_CITERS, DEFAULT_REFERENCES, DistanceConfig, TrainedModel, classify_citation_knn

REPORT_VERSION = 1
DEFAULT_FOLDS = 5
DEFAULT_RUNS = 5


def derive_seed(seed: int, tag: str) -> int:
    """Deterministic child seed for a named purpose."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(tag.encode())])
    return int(ss.generate_state(1, np.uint32)[0])


@dataclass
class FoldPlan:
    folds: list
    seed: int
    k: int

    def train_test(self, i: int) -> tuple[list[int], list[int]]:
        test = self.folds[i]
        train = sorted(j for f, fold in enumerate(self.folds) if f != i for j in fold)
        return train, list(test)


def stratified_folds(labels, k: int = DEFAULT_FOLDS, seed: int = 0, stratify: bool = True) -> FoldPlan:
    """Deal shuffled indices round-robin into ``k`` folds, class by class.

    Classes are visited in order of first appearance and the dealing position
    carries over from one class to the next, which also balances fold sizes.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    labels = list(labels)
    rng = np.random.default_rng(seed)
    if stratify:
        groups = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        small = {lab: len(ix) for lab, ix in groups.items() if len(ix) < k}
        if small:
            raise ClassTooSmall(f"classes with fewer than {k} members: {small}")
    else:
        if len(labels) < k:
            raise ClassTooSmall(f"{len(labels)} items cannot fill {k} folds")
        groups = {None: list(range(len(labels)))}
    folds = [[] for _ in range(k)]
    pos = 0
    for ix in groups.values():
        for i in rng.permutation(np.array(ix)):
            folds[pos % k].append(int(i))
            pos += 1
    return FoldPlan([sorted(f) for f in folds], seed, k)


@dataclass
class ConfusionMatrix:
    classes: list
    counts: np.ndarray

    @property
    def row_percent(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        out = np.zeros(self.counts.shape, dtype=np.float64)
        np.divide(100.0 * self.counts, rows, out=out, where=rows > 0)
        return out

    @property
    def empty_rows(self) -> list:
        return [c for c, n in zip(self.classes, self.counts.sum(axis=1)) if n == 0]

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return 100.0 * float(np.trace(self.counts)) / total if total else 0.0

    def __add__(self, other):
        assert self.classes == other.classes
        return ConfusionMatrix(self.classes, self.counts + other.counts)

    def format_table(self, digits: int = 2) -> str:
        width = max(8, max(len(c) for c in self.classes) + 2)
        lines = [" " * width + "".join(f"{c:>{width}}" for c in self.classes)]
        for c, row in zip(self.classes, self.row_percent):
            lines.append(f"{c:<{width}}" + "".join(f"{v:>{width}.{digits}f}" for v in row))
        return "\n".join(lines)


def confusion_matrix(truths, predictions, classes) -> ConfusionMatrix:
    truths, predictions = list(truths), list(predictions)
    if len(truths) != len(predictions):
        raise ValueError("truths and predictions differ in length")
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truths, predictions):
        if t not in index or p not in index:
            raise UnknownClass(f"label {t if t not in index else p!r} not in {list(classes)}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(list(classes), counts)


@dataclass
class FoldResult:
    run: int
    fold: int
    test_indices: list
    predictions: list

    def correct(self, labels) -> int:
        return sum(labels[i] == p for i, p in zip(self.test_indices, self.predictions))


@dataclass
class Report:
    classes: list
    run_accuracies: list
    confusion: ConfusionMatrix
    config: dict
    folds: list = field(default_factory=list, repr=False)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.run_accuracies))

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "mean_accuracy": self.mean_accuracy,
            "run_accuracies": [float(a) for a in self.run_accuracies],
            "classes": list(self.classes),
            "confusion_counts": self.confusion.counts.tolist(),
            "confusion_row_percent": self.confusion.row_percent.tolist(),
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def summary(self) -> str:
        lines = [f"mean accuracy: {self.mean_accuracy:.2f}%  "
                 f"(runs: {', '.join(f'{a:.2f}' for a in self.run_accuracies)})",
                 "confusion matrix (rows = truth, % of row):",
                 self.confusion.format_table()]
        return "\n".join(lines)


def cross_validate(labels, fold_data, k: int = DEFAULT_FOLDS, runs: int = DEFAULT_RUNS,
                   base_seed: int = 0, references: int = DEFAULT_REFERENCES,
                   citers: int = DEFAULT_CITERS, cfg: DistanceConfig = DistanceConfig(),
                   classes=None, stratify: bool = True, config_echo=None) -> Report:
    """Generic repeated k-fold driver.

    ``fold_data(run, fold, train_idx, test_idx)`` returns ``(train_bags,
    test_bags)``; it lets callers rebuild features per fold (for example with
    a codebook trained on the training images only).
    """
    labels = list(labels)
    if classes is None:
        classes = list(dict.fromkeys(labels))
    run_acc = []
    pooled = confusion_matrix([], [], classes)
    results = []
    for r in range(runs):
        plan = stratified_folds(labels, k, base_seed + r, stratify=stratify)
        correct = 0
        for f in range(k):
            train_idx, test_idx = plan.train_test(f)
            train_bags, test_bags = fold_data(r, f, train_idx, test_idx)
            model = TrainedModel(train_bags, references, citers, cfg, classes=classes)
            preds = [classify_citation_knn(b, model).label for b in test_bags]
            fr = FoldResult(r, f, test_idx, preds)
            results.append(fr)
            correct += fr.correct(labels)
            pooled = pooled + confusion_matrix([labels[i] for i in test_idx], preds, classes)
        run_acc.append(100.0 * correct / len(labels))
    echo = {"folds": k, "runs": runs, "base_seed": base_seed, "references": references,
            "citers": citers, "instance_metric": cfg.instance_metric,
            "bag_distance": cfg.bag_distance, "rank": cfg.rank, "stratify": stratify}
    echo.update(config_echo or {})
    return Report(classes, run_acc, pooled, echo, results)


def run_cv(bags, k: int = DEFAULT_FOLDS, runs: int = DEFAULT_RUNS, base_seed: int = 0,
           references: int = DEFAULT_REFERENCES, citers: int = DEFAULT_CITERS,
           cfg: DistanceConfig = DistanceConfig(), stratify: bool = True, config_echo=None) -> Report:
    """Cross-validate Citation-KNN on already-extracted labelled bags."""
    bags = list(bags)
    if any(b.label is None for b in bags):
        raise ValueError("run_cv needs labelled bags")

    def fold_data(run, fold, train_idx, test_idx):
        return [bags[i] for i in train_idx], [bags[i] for i in test_idx]

    return cross_validate([b.label for b in bags], fold_data, k, runs, base_seed,
                          references, citers, cfg, stratify=stratify, config_echo=config_echo)
