"""Classification metrics."""

import numpy as np
from scipy.optimize import linear_sum_assignment


def f1_macro(predictions, labels, n_classes):
    """Unweighted mean of per-class F1. A class with no true and no
    predicted members scores 0."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must have equal length")
    scores = []
    for c in range(n_classes):
        tp = np.sum((predictions == c) & (labels == c))
        denom = np.sum(predictions == c) + np.sum(labels == c)
        scores.append(2.0 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def accuracy(predictions, labels):
    predictions = np.asarray(predictions)
    return float(np.mean(predictions == np.asarray(labels))) if len(predictions) else float("nan")


def best_permutation(predictions, labels, n_classes):
    """Mapping ``cluster -> label`` maximizing agreement (Hungarian)."""
    counts = np.zeros((n_classes, n_classes))
    np.add.at(counts, (np.asarray(predictions), np.asarray(labels)), 1)
    rows, cols = linear_sum_assignment(-counts)
    mapping = np.arange(n_classes)
    mapping[rows] = cols
    return mapping


def cluster_accuracy(predictions, labels, n_classes):
    """Accuracy of cluster ids under their best one-to-one relabeling."""
    mapping = best_permutation(predictions, labels, n_classes)
    return accuracy(mapping[np.asarray(predictions)], labels)
