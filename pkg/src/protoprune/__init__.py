"""Prototype-guided dynamic dataset pruning for graph classification."""

from .data import GraphSample, generate_synthetic, load_tu_dataset
from .estimator import PrunedGraphClassifier

__all__ = ["GraphSample", "PrunedGraphClassifier", "generate_synthetic", "load_tu_dataset"]
__version__ = "0.1.0"
