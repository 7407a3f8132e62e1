"""Graph datasets: TU text format I/O, a synthetic generator, and the
class-imbalance and feature-noise corruption protocols."""

import dataclasses
import glob
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyClass, InconsistentIndicator, ParseError


@dataclass(frozen=True, eq=False)
class GraphSample:
    """One graph. ``is_outlier`` marks injected noise for evaluation only."""

    id: int
    adjacency: np.ndarray
    features: np.ndarray
    label: int | None = None
    is_outlier: bool = False

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.uint8)
        feats = np.asarray(self.features, dtype=np.float64)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got {adj.shape}")
        if feats.ndim != 2 or feats.shape[0] != adj.shape[0]:
            raise ValueError(
                f"features must have one row per node ({adj.shape[0]}), got {feats.shape}"
            )
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adj)):
            raise ValueError("adjacency must have a zero diagonal")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "features", feats)

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    @property
    def n_edges(self):
        return int(self.adjacency.sum() // 2)


def same_graph(a, b):
    """Content equality (ignores ``id``)."""
    return (
        a.label == b.label
        and a.is_outlier == b.is_outlier
        and np.array_equal(a.adjacency, b.adjacency)
        and np.array_equal(a.features, b.features)
    )


def labels_of(graphs):
    return np.array([g.label for g in graphs], dtype=np.int64)


# --------------------------------------------------------------------- TU I/O


def _read_rows(path, n_cols, cast=int):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != n_cols:
                raise ParseError(path, lineno, f"expected {n_cols} value(s), got {len(parts)}")
            try:
                rows.append([cast(p) for p in parts])
            except ValueError:
                raise ParseError(path, lineno, f"not a number: {line!r}") from None
    return rows


def _dataset_name(directory):
    hits = glob.glob(os.path.join(directory, "*_A.txt"))
    if len(hits) != 1:
        raise FileNotFoundError(f"expected exactly one *_A.txt in {directory}, found {len(hits)}")
    return os.path.basename(hits[0])[: -len("_A.txt")]


def load_tu_dataset(directory, name=None):
    """Read a TU-format dataset directory into a list of graphs.

    Graph labels are remapped to ``0..C-1`` in sorted order of the original
    values. Node labels, when present, become one-hot features; otherwise
    every node gets the constant feature 1.0.
    """
    name = name or _dataset_name(directory)
    path = lambda suffix: os.path.join(directory, f"{name}_{suffix}.txt")  # noqa: E731

    indicator = [r[0] for r in _read_rows(path("graph_indicator"), 1)]
    for lineno in range(1, len(indicator)):
        if indicator[lineno] < indicator[lineno - 1]:
            raise InconsistentIndicator(
                f"{path('graph_indicator')}:{lineno + 1}: graph id decreases "
                f"({indicator[lineno - 1]} -> {indicator[lineno]})"
            )
    graph_labels = [r[0] for r in _read_rows(path("graph_labels"), 1)]
    n_graphs = len(graph_labels)
    indicator = np.asarray(indicator) - 1
    if len(indicator) and (indicator.min() < 0 or indicator.max() >= n_graphs):
        raise InconsistentIndicator(
            f"graph ids in {path('graph_indicator')} exceed the {n_graphs} graph labels"
        )
    n_nodes_total = len(indicator)

    if os.path.exists(path("node_labels")):
        node_labels = np.asarray([r[0] for r in _read_rows(path("node_labels"), 1)])
        if len(node_labels) != n_nodes_total:
            raise ParseError(path("node_labels"), len(node_labels), "node count mismatch")
        values, codes = np.unique(node_labels, return_inverse=True)
        features = np.eye(len(values))[codes]
    else:
        features = np.ones((n_nodes_total, 1))

    counts = np.bincount(indicator, minlength=n_graphs)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    adjs = [np.zeros((c, c), dtype=np.uint8) for c in counts]
    edge_path = path("A")
    for lineno, (u, v) in enumerate(_read_rows(edge_path, 2), start=1):
        u, v = u - 1, v - 1
        if not (0 <= u < n_nodes_total and 0 <= v < n_nodes_total):
            raise ParseError(edge_path, lineno, f"node id out of range ({u + 1}, {v + 1})")
        g = indicator[u]
        if indicator[v] != g:
            raise ParseError(edge_path, lineno, "edge joins two different graphs")
        if u == v:
            continue
        a, b = u - offsets[g], v - offsets[g]
        adjs[g][a, b] = adjs[g][b, a] = 1

    classes = sorted(set(graph_labels))
    remap = {c: i for i, c in enumerate(classes)}
    return [
        GraphSample(
            id=i,
            adjacency=adjs[i],
            features=features[offsets[i] : offsets[i + 1]],
            label=remap[graph_labels[i]],
        )
        for i in range(n_graphs)
    ]


def write_tu_dataset(graphs, directory, name):
    """Write graphs in TU format; inverse of ``load_tu_dataset``.

    Features must be either one-hot rows (written as node labels) or the
    constant 1.0 column.
    """
    os.makedirs(directory, exist_ok=True)
    feats = np.concatenate([g.features for g in graphs])
    constant = feats.shape[1] == 1 and np.all(feats == 1.0)
    one_hot = np.all((feats == 0) | (feats == 1)) and np.all(feats.sum(axis=1) == 1)
    if not (constant or one_hot):
        raise ValueError("only one-hot or constant node features can be written in TU format")

    path = lambda suffix: os.path.join(directory, f"{name}_{suffix}.txt")  # noqa: E731
    offset = 0
    with open(path("A"), "w") as fa, open(path("graph_indicator"), "w") as fi:
        for gi, g in enumerate(graphs):
            for u, v in zip(*np.nonzero(g.adjacency)):
                fa.write(f"{u + offset + 1}, {v + offset + 1}\n")
            fi.write(f"{gi + 1}\n" * g.n_nodes)
            offset += g.n_nodes
    with open(path("graph_labels"), "w") as fh:
        fh.writelines(f"{g.label}\n" for g in graphs)
    if not constant:
        with open(path("node_labels"), "w") as fh:
            fh.writelines(f"{i}\n" for i in feats.argmax(axis=1))


# ------------------------------------------------------------------ synthetic


def _plant_motif(adj, kind, rng):
    n = adj.shape[0]
    nodes = rng.choice(n, size=min(n, 6), replace=False)
    hub, rest = nodes[0], nodes[1:]
    if kind == 0:  # triangle fan: hub joined to consecutive pairs that are linked
        for a, b in zip(rest[::2], rest[1::2]):
            adj[hub, a] = adj[hub, b] = adj[a, b] = 1
    elif kind == 1:  # star
        adj[hub, rest] = 1
    elif kind == 2:  # cycle
        ring = np.append(nodes, nodes[0])
        adj[ring[:-1], ring[1:]] = 1
    else:  # clique
        adj[np.ix_(nodes, nodes)] = 1
    adj |= adj.T
    np.fill_diagonal(adj, 0)


def generate_synthetic(
    n_per_class=(50, 50),
    seed=0,
    n_nodes=(10, 20),
    edge_prob=0.15,
    n_features=8,
    mean_gap=4.0,
    sigma=1.0,
    check_separable=True,
):
    """Random graphs with a class-specific planted motif and class-shifted
    Gaussian node features.

    Class means sit at ``mean_gap * sigma / sqrt(2) * e_c``, so any two
    class means are ``mean_gap * sigma`` apart. With ``check_separable`` a
    held-out logistic probe on per-graph mean features must reach 90%
    accuracy or ``ValueError`` is raised.
    """
    n_classes = len(n_per_class)
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if n_features < n_classes:
        raise ValueError("n_features must be at least the number of classes")
    rng = np.random.default_rng(seed)
    means = np.eye(n_classes, n_features) * mean_gap * sigma / np.sqrt(2.0)

    graphs = []
    for c, count in enumerate(n_per_class):
        for _ in range(count):
            n = int(rng.integers(n_nodes[0], n_nodes[1] + 1))
            upper = np.triu(rng.random((n, n)) < edge_prob, k=1)
            adj = (upper | upper.T).astype(np.uint8)
            _plant_motif(adj, c % 4, rng)
            feats = means[c] + sigma * rng.standard_normal((n, n_features))
            graphs.append(GraphSample(id=len(graphs), adjacency=adj, features=feats, label=c))

    order = rng.permutation(len(graphs))
    graphs = [dataclasses.replace(graphs[j], id=i) for i, j in enumerate(order)]
    if check_separable:
        acc = linear_probe_accuracy(graphs, seed=seed)
        if acc < 0.9:
            raise ValueError(f"synthetic classes not separable enough (probe accuracy {acc:.3f})")
    return graphs


def linear_probe_accuracy(graphs, seed=0):
    """Held-out accuracy of a logistic probe on per-graph mean features."""
    from sklearn.linear_model import LogisticRegression

    X = np.stack([g.features.mean(axis=0) for g in graphs])
    y = labels_of(graphs)
    perm = np.random.default_rng(seed).permutation(len(graphs))
    half = len(graphs) // 2
    train, test = perm[:half], perm[half:]
    probe = LogisticRegression(max_iter=1000).fit(X[train], y[train])
    return float(probe.score(X[test], y[test]))


def parse_synthetic(descriptor):
    """Parse ``synthetic[:key=value,...]`` into ``generate_synthetic`` kwargs.

    Keys: ``n`` (per-class counts joined by ``/``), ``seed``, ``nodes``
    (``lo-hi``), ``p``, ``feat``, ``gap``, ``sigma``.
    """
    head, _, body = descriptor.partition(":")
    if head != "synthetic":
        raise ValueError(f"not a synthetic descriptor: {descriptor!r}")
    kwargs = {}
    for item in filter(None, body.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"bad synthetic option {item!r}")
        if key == "n":
            kwargs["n_per_class"] = tuple(int(v) for v in value.split("/"))
        elif key == "seed":
            kwargs["seed"] = int(value)
        elif key == "nodes":
            lo, hi = value.split("-")
            kwargs["n_nodes"] = (int(lo), int(hi))
        elif key == "p":
            kwargs["edge_prob"] = float(value)
        elif key == "feat":
            kwargs["n_features"] = int(value)
        elif key == "gap":
            kwargs["mean_gap"] = float(value)
        elif key == "sigma":
            kwargs["sigma"] = float(value)
        else:
            raise ValueError(f"unknown synthetic option {key!r}")
    return kwargs


# ------------------------------------------------------------------ protocols


def split_dataset(graphs, fractions=(0.8, 0.1, 0.1), seed=0):
    """Random train/val/test split; ids are renumbered within each part."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three values summing to 1, got {fractions}")
    perm = np.random.default_rng(seed).permutation(len(graphs))
    n_train = int(round(fractions[0] * len(graphs)))
    n_val = int(round(fractions[1] * len(graphs)))
    parts = perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]
    return tuple([dataclasses.replace(graphs[j], id=i) for i, j in enumerate(p)] for p in parts)


def _resize(indices, target, rng):
    """Subsample (or cyclically duplicate) ``indices`` to ``target`` entries."""
    indices = np.asarray(indices)
    if target <= len(indices):
        return np.sort(rng.choice(indices, size=target, replace=False))
    extra = rng.choice(indices, size=target - len(indices), replace=target - len(indices) > len(indices))
    return np.concatenate([indices, np.sort(extra)])


def apply_imbalance(graphs, minority_class, ratio, seed=0):
    """Resample so that ``minority_class : everything else`` equals ``ratio``.

    The designated class is resized first (subsampled, or duplicated when it
    must grow); the remaining classes share the rest of the original total
    in proportion to their current sizes. Graph contents are never changed;
    duplicates are copies with fresh ids.
    """
    a, b = ratio
    if a < 0 or b < 0 or a + b <= 0:
        raise ValueError(f"bad ratio {ratio}")
    labels = labels_of(graphs)
    n = len(graphs)
    rng = np.random.default_rng(seed)
    target_min = int(round(n * a / (a + b)))
    own = np.flatnonzero(labels == minority_class)
    if target_min == 0 or len(own) == 0:
        raise EmptyClass(f"class {minority_class} would have no samples")

    others = [c for c in np.unique(labels) if c != minority_class]
    other_counts = np.array([np.sum(labels == c) for c in others], dtype=np.float64)
    remaining = n - target_min
    # largest-remainder apportionment of the other classes' share
    raw = remaining * other_counts / other_counts.sum() if len(others) else np.zeros(0)
    targets = np.floor(raw).astype(int)
    for j in np.argsort(-(raw - targets), kind="stable")[: remaining - targets.sum()]:
        targets[j] += 1

    chosen = [_resize(own, target_min, rng)]
    for c, t in zip(others, targets):
        members = np.flatnonzero(labels == c)
        if t > 0:
            chosen.append(_resize(members, t, rng))
    picked = np.concatenate(chosen)
    return [dataclasses.replace(graphs[j], id=i) for i, j in enumerate(picked)]


def inject_noise(graphs, fraction, sigma=1.0, seed=0):
    """Add N(0, sigma^2) noise to the node features of a random
    ``floor(fraction * N)`` subset and flag those graphs as outliers."""
    if not 0 <= fraction < 1:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    n_noisy = int(np.floor(fraction * len(graphs)))
    noisy = set(rng.choice(len(graphs), size=n_noisy, replace=False).tolist())
    out = []
    for i, g in enumerate(graphs):
        if i in noisy:
            feats = g.features + sigma * rng.standard_normal(g.features.shape)
            g = dataclasses.replace(g, features=feats, is_outlier=True)
        out.append(g)
    return out


def minority_class(labels, n_classes):
    """Least frequent class (lowest index on ties)."""
    return int(np.argmin(np.bincount(labels, minlength=n_classes)))
