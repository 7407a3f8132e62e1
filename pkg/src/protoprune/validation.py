"""Input checks for the estimator API."""

import numpy as np

from .data import GraphSample


def check_graphs(X):
    """Return ``X`` as a non-empty list of ``GraphSample`` with a shared
    feature width."""
    graphs = list(X)
    if not graphs:
        raise ValueError("expected at least one graph")
    for g in graphs:
        if not isinstance(g, GraphSample):
            raise TypeError(f"expected GraphSample, got {type(g).__name__}")
    widths = {g.features.shape[1] for g in graphs}
    if len(widths) != 1:
        raise ValueError(f"graphs disagree on feature width: {sorted(widths)}")
    return graphs


def check_graph_labels(graphs, y=None):
    """Resolve labels (``y`` or each graph's own) to ``(classes_, codes)``."""
    if y is None:
        if any(g.label is None for g in graphs):
            raise ValueError("labels missing: pass y or set GraphSample.label")
        y = [g.label for g in graphs]
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(graphs):
        raise ValueError(f"y must be 1-D with {len(graphs)} entries, got shape {y.shape}")
    classes, codes = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("need at least two classes to train a classifier")
    return classes, codes
