"""Evaluation framework for visual place recognition techniques."""

__version__ = "0.1.0"

from .dataset import (
    Dataset,
    GroundTruth,
    inject_true_negatives,
    interchange_query_reference,
    load_dataset,
    save_dataset,
    widen_ground_truth,
)
from .imaging import ImageGrid
from .synth import SynthSpec, generate_synthetic_dataset
from .technique import Descriptor, DescriptorSet, MatchResult, PrecomputedTechnique, VprTechnique, load_precomputed_results
from .builtin import HogConfig, HogTechnique, PatchNormConfig, PatchNormTechnique, cosine_score, hog_describe, l1_score, patchnorm_describe
from .engine import ConfusionMatrix, TimingProfile, build_confusion_matrix, measure_timings
from .metrics import CurveReport, SpeedModel, pr_curve_auc, recall_rate_at_n, retrieval_speed_model, roc_curve_auc, tp_distribution
from .invariance import area_between_curves, generate_variation_sequence, invariance_limit, variation_trace

__all__ = [
    "ConfusionMatrix",
    "CurveReport",
    "Dataset",
    "Descriptor",
    "DescriptorSet",
    "GroundTruth",
    "HogConfig",
    "HogTechnique",
    "ImageGrid",
    "MatchResult",
    "PatchNormConfig",
    "PatchNormTechnique",
    "PrecomputedTechnique",
    "SpeedModel",
    "SynthSpec",
    "TimingProfile",
    "VprTechnique",
    "area_between_curves",
    "build_confusion_matrix",
    "cosine_score",
    "generate_synthetic_dataset",
    "generate_variation_sequence",
    "hog_describe",
    "inject_true_negatives",
    "interchange_query_reference",
    "invariance_limit",
    "l1_score",
    "load_dataset",
    "load_precomputed_results",
    "measure_timings",
    "patchnorm_describe",
    "pr_curve_auc",
    "recall_rate_at_n",
    "retrieval_speed_model",
    "roc_curve_auc",
    "save_dataset",
    "tp_distribution",
    "variation_trace",
    "widen_ground_truth",
]
