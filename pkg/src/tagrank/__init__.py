"""Multilabel tag ranking: softmax, pairwise and WARP losses on a small
MLP scorer, kNN and linear SVM baselines, and top-k annotation metrics."""

from .core import (Dataset, Example, LabelVector, LossResult, NumericalError,
                   ValidationError, label_vector_from)
from .estimators import KNNTagger, LinearSVMTagger, RankingTagger

__all__ = [
    "Dataset", "Example", "LabelVector", "LossResult", "NumericalError",
    "ValidationError", "label_vector_from",
    "KNNTagger", "LinearSVMTagger", "RankingTagger",
]

__version__ = "0.1.0"
