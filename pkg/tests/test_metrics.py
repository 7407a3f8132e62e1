import numpy as np
import pytest

from protoprune.metrics import accuracy, best_permutation, cluster_accuracy, f1_macro


def test_f1_examples():
    assert f1_macro([0, 1, 1, 0], [0, 1, 1, 0], 2) == 1.0
    assert f1_macro([0, 0, 0, 0], [0, 0, 1, 1], 2) == pytest.approx(1 / 3)
    assert f1_macro([1, 1, 1], [1, 1, 1], 2) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        f1_macro([0, 1], [0], 2)


def test_f1_matches_sklearn_when_all_classes_present(rng):
    from sklearn.metrics import f1_score

    for _ in range(20):
        y = rng.integers(0, 3, 40)
        p = rng.integers(0, 3, 40)
        if len(set(y) | set(p)) == 3:
            assert f1_macro(p, y, 3) == pytest.approx(f1_score(y, p, average="macro"))


def test_accuracy_and_permutations():
    assert accuracy([1, 0, 1], [1, 1, 1]) == pytest.approx(2 / 3)
    assert np.isnan(accuracy([], []))
    assert best_permutation([1, 1, 0, 0], [0, 0, 1, 1], 2).tolist() == [1, 0]
    assert cluster_accuracy([2, 2, 0, 0, 1], [0, 0, 1, 1, 2], 3) == 1.0
    assert cluster_accuracy([0, 0, 0, 0], [0, 1, 0, 1], 2) == 0.5
