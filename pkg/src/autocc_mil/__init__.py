"""Diabetic-retinopathy image classification with block auto-correlograms and Citation-KNN."""

from .errors import PipelineError
from .evaluation import (ConfusionMatrix, FoldPlan, Report, confusion_matrix, run_cv,
                         stratified_folds)
from .features import Bag, Block, compute_autocc, extract_bag, partition_blocks
from .mil import (DistanceConfig, Prediction, TrainedModel, bag_distance, classify_citation_knn,
                  instance_distance, rank_neighbors)
from .quantizer import Codebook, ShadeSet, collect_unique_shades, quantize_raster, train_codebook
from .raster import CropBox, crop, detect_retina_crop, equalize_red_channel
from .synthetic import gen_synthetic

__all__ = [
    "Bag", "Block", "Codebook", "ConfusionMatrix", "CropBox", "DistanceConfig", "FoldPlan",
    "PipelineError", "Prediction", "Report", "ShadeSet", "TrainedModel", "bag_distance",
    "classify_citation_knn", "collect_unique_shades", "compute_autocc", "confusion_matrix",
    "crop", "detect_retina_crop", "equalize_red_channel", "extract_bag", "gen_synthetic",
    "instance_distance", "partition_blocks", "quantize_raster", "rank_neighbors", "run_cv",
    "stratified_folds", "train_codebook",
]
