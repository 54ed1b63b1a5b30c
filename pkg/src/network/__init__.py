"""去噪网络、引导分类器与检查点"""

from src.network.denoiser import DenoiserHyper, DenoiserModel, grad, loss, predict, train
from src.network.features import extract_features
from src.network.guidance import (
    GuidanceClassifiers,
    classifier_ratios,
    guide_bernoulli,
    majority_label,
    train_classifiers,
)

__all__ = [
    "DenoiserHyper",
    "DenoiserModel",
    "grad",
    "loss",
    "predict",
    "train",
    "extract_features",
    "GuidanceClassifiers",
    "classifier_ratios",
    "guide_bernoulli",
    "majority_label",
    "train_classifiers",
]
