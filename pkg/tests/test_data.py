import os

import numpy as np
import pytest

from protoprune.data import (
    GraphSample,
    apply_imbalance,
    generate_synthetic,
    inject_noise,
    labels_of,
    linear_probe_accuracy,
    load_tu_dataset,
    parse_synthetic,
    same_graph,
    split_dataset,
    write_tu_dataset,
)
from protoprune.exceptions import EmptyClass, InconsistentIndicator, ParseError


def write_files(directory, name="TOY", **files):
    for suffix, text in files.items():
        with open(os.path.join(directory, f"{name}_{suffix}.txt"), "w") as fh:
            fh.write(text)


def test_two_node_fixture(tmp_path):
    write_files(tmp_path, A="1, 2\n2, 1\n", graph_indicator="1\n1\n", graph_labels="-1\n")
    (g,) = load_tu_dataset(tmp_path)
    assert g.n_nodes == 2 and g.n_edges == 1 and g.label == 0
    np.testing.assert_array_equal(g.features, [[1.0], [1.0]])


def test_labels_remapped_and_node_labels_one_hot(tmp_path):
    write_files(
        tmp_path,
        A="1, 2\n3, 4\n4, 5\n",
        graph_indicator="1\n1\n2\n2\n2\n",
        graph_labels="7\n3\n",
        node_labels="0\n2\n2\n5\n0\n",
    )
    a, b = load_tu_dataset(tmp_path)
    assert (a.label, b.label) == (1, 0)
    np.testing.assert_array_equal(a.features, [[1, 0, 0], [0, 1, 0]])
    assert b.n_edges == 2 and b.adjacency[0, 1] == b.adjacency[1, 0] == 1


def test_parse_errors_carry_line_numbers(tmp_path):
    write_files(tmp_path, A="1, 2\n2 1\n", graph_indicator="1\n1\n", graph_labels="0\n")
    with pytest.raises(ParseError) as err:
        load_tu_dataset(tmp_path)
    assert err.value.lineno == 2

    write_files(tmp_path, A="1, x\n", graph_indicator="1\n1\n", graph_labels="0\n")
    with pytest.raises(ParseError):
        load_tu_dataset(tmp_path)


def test_non_monotone_indicator(tmp_path):
    write_files(tmp_path, A="1, 2\n", graph_indicator="2\n1\n", graph_labels="0\n1\n")
    with pytest.raises(InconsistentIndicator):
        load_tu_dataset(tmp_path)


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    graphs = []
    for i in range(6):
        n = int(rng.integers(1, 7))
        upper = np.triu(rng.random((n, n)) < 0.5, k=1)
        feats = np.eye(3)[rng.integers(0, 3, n)]
        graphs.append(GraphSample(i, (upper | upper.T).astype(np.uint8), feats, int(rng.integers(0, 2))))
    # make sure every node-label value appears so the one-hot width survives
    graphs[0] = GraphSample(0, np.zeros((3, 3), np.uint8), np.eye(3), 1)
    write_tu_dataset(graphs, tmp_path, "RT")
    loaded = load_tu_dataset(tmp_path)
    assert len(loaded) == len(graphs)
    assert all(same_graph(a, b) for a, b in zip(graphs, loaded))


def test_graph_sample_validation():
    with pytest.raises(ValueError):
        GraphSample(0, np.array([[0, 1], [0, 0]]), np.ones((2, 1)))
    with pytest.raises(ValueError):
        GraphSample(0, np.array([[1]]), np.ones((1, 1)))
    with pytest.raises(ValueError):
        GraphSample(0, np.zeros((2, 2)), np.ones((3, 1)))


# ------------------------------------------------------------------ synthetic


def test_synthetic_counts_and_determinism():
    a = generate_synthetic((50, 50), seed=3)
    b = generate_synthetic((50, 50), seed=3)
    assert np.bincount(labels_of(a)).tolist() == [50, 50]
    assert all(same_graph(x, y) for x, y in zip(a, b))
    assert [g.id for g in a] == list(range(100))
    c = generate_synthetic((50, 50), seed=4)
    assert not all(same_graph(x, y) for x, y in zip(a, c))


def test_synthetic_separability():
    graphs = generate_synthetic((50, 50), seed=0, mean_gap=4.0)
    assert linear_probe_accuracy(graphs) >= 0.95
    with pytest.raises(ValueError):
        generate_synthetic((30, 30), seed=0, mean_gap=0.0)


def test_synthetic_descriptor_parsing():
    kw = parse_synthetic("synthetic:n=10/20/30,gap=3,feat=5,nodes=4-9,p=0.2,sigma=2,seed=7")
    assert kw == dict(n_per_class=(10, 20, 30), mean_gap=3.0, n_features=5, n_nodes=(4, 9),
                      edge_prob=0.2, sigma=2.0, seed=7)
    assert parse_synthetic("synthetic") == {}
    with pytest.raises(ValueError):
        parse_synthetic("synthetic:bogus=1")


def test_split_sizes():
    graphs = generate_synthetic((50, 50), seed=0)
    train, val, test = split_dataset(graphs, (0.8, 0.1, 0.1), seed=1)
    assert (len(train), len(val), len(test)) == (80, 10, 10)
    with pytest.raises(ValueError):
        split_dataset(graphs, (0.5, 0.5, 0.5))


# ------------------------------------------------------------------ protocols


def test_imbalance_one_to_nine():
    graphs = generate_synthetic((50, 50), seed=0)
    out = apply_imbalance(graphs, 0, (1, 9), seed=0)
    assert np.bincount(labels_of(out)).tolist() == [10, 90]
    swapped = apply_imbalance(graphs, 1, (9, 1), seed=0)
    assert np.bincount(labels_of(swapped)).tolist() == [10, 90]


def test_imbalance_balanced_is_identity_on_counts():
    graphs = generate_synthetic((50, 50), seed=0)
    out = apply_imbalance(graphs, 0, (5, 5), seed=0)
    assert np.bincount(labels_of(out)).tolist() == [50, 50]
    assert sorted(id(g.adjacency) for g in out) == sorted(id(g.adjacency) for g in graphs)


def test_imbalance_never_mutates_contents():
    graphs = generate_synthetic((50, 50), seed=2)
    out = apply_imbalance(graphs, 0, (1, 9), seed=2)
    assert len(out) == 100
    assert all(any(same_graph(g, h) for h in graphs) for g in out)
    with pytest.raises(EmptyClass):
        apply_imbalance(graphs, 0, (0, 1))


def test_noise_injection():
    graphs = generate_synthetic((100, 100), seed=0)
    assert all(same_graph(a, b) for a, b in zip(inject_noise(graphs, 0.0), graphs))
    noisy = inject_noise(graphs, 0.1, sigma=1.0, seed=5)
    flagged = [g.is_outlier for g in noisy]
    assert sum(flagged) == 20
    for before, after in zip(graphs, noisy):
        assert after.label == before.label
        if after.is_outlier:
            assert not np.array_equal(after.features, before.features)
        else:
            assert np.array_equal(after.features, before.features)
    silent = inject_noise(graphs, 0.1, sigma=0.0, seed=5)
    assert sum(g.is_outlier for g in silent) == 20
    assert all(np.array_equal(a.features, b.features) for a, b in zip(silent, graphs))
