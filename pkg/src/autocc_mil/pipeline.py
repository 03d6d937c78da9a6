"""Image-level composition: codebook training and cross-validation on rasters."""

import hashlib
import logging

from .evaluation import DEFAULT_FOLDS, DEFAULT_RUNS, cross_validate, derive_seed
from .features import DEFAULT_GRID, extract_bag_preprocessed
from .mil import DEFAULT_CITERS, DEFAULT_REFERENCES, DistanceConfig
from .quantizer import DEFAULT_K, Codebook, codebook_to_json, collect_unique_shades, train_codebook
from .raster import DEFAULT_CROP_THRESHOLD, preprocess

log = logging.getLogger(__name__)


def codebook_digest(cb: Codebook) -> str:
    return hashlib.sha256(codebook_to_json(cb).encode()).hexdigest()[:16]


def build_codebook(preprocessed, k: int = DEFAULT_K, seed: int = 0) -> Codebook:
    """Train a codebook on already cropped and equalized rasters."""
    return train_codebook(collect_unique_shades(preprocessed), k=k, seed=seed)


def evaluate_images(images, labels, k_bins: int = DEFAULT_K, grid: int = DEFAULT_GRID,
                    crop_threshold: float = DEFAULT_CROP_THRESHOLD, folds: int = DEFAULT_FOLDS,
                    runs: int = DEFAULT_RUNS, seed: int = 0, references: int = DEFAULT_REFERENCES,
                    citers: int = DEFAULT_CITERS, cfg: DistanceConfig = DistanceConfig(),
                    stratify: bool = True, shared_codebook: bool = False, ids=None,
                    preprocessed: bool = False):
    """Full cross-validation from rasters.

    Each fold trains its own codebook on the training images only.  With
    ``shared_codebook`` one codebook is trained on every image up front, which
    leaks test shades into the quantizer but is much faster.
    """
    labels = list(labels)
    ids = list(ids) if ids is not None else [str(i) for i in range(len(labels))]
    pre = list(images) if preprocessed else [preprocess(img, crop_threshold) for img in images]
    digests = []

    def bags_for(cb, indices):
        return [extract_bag_preprocessed(pre[i], cb, grid, ids[i], labels[i]) for i in indices]

    if shared_codebook:
        cb = build_codebook(pre, k_bins, derive_seed(seed, "codebook/shared"))
        digests.append(codebook_digest(cb))
        all_bags = bags_for(cb, range(len(pre)))

        def fold_data(run, fold, train_idx, test_idx):
            return [all_bags[i] for i in train_idx], [all_bags[i] for i in test_idx]
    else:
        def fold_data(run, fold, train_idx, test_idx):
            cb = build_codebook([pre[i] for i in train_idx], k_bins,
                                derive_seed(seed, f"codebook/run{run}/fold{fold}"))
            digests.append(codebook_digest(cb))
            log.info("run %d fold %d: codebook %s (%d shades, sse %.1f)",
                     run, fold, digests[-1], cb.shade_count, cb.training_sse)
            return bags_for(cb, train_idx), bags_for(cb, test_idx)

    echo = {"k_bins": k_bins, "grid": grid, "crop_threshold": crop_threshold,
            "seed": seed, "shared_codebook": shared_codebook}
    report = cross_validate(labels, fold_data, folds, runs, seed, references, citers, cfg,
                            stratify=stratify, config_echo=echo)
    report.config["codebook_hashes"] = digests
    return report
