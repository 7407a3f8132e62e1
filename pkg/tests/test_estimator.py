import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from protoprune import PrunedGraphClassifier
from protoprune.data import generate_synthetic, labels_of


@pytest.fixture(scope="module")
def graphs():
    return generate_synthetic((20, 20), seed=0)


def test_params_round_trip():
    est = PrunedGraphClassifier(method="soft-random", remain_ratio=0.3, tau=0.01)
    params = est.get_params()
    assert params["method"] == "soft-random" and params["tau"] == 0.01
    twin = clone(est)
    assert twin.get_params() == params
    assert est.set_params(epochs=7).epochs == 7


def test_predict_before_fit(graphs):
    with pytest.raises(NotFittedError):
        PrunedGraphClassifier().predict(graphs)


@pytest.mark.parametrize("method", ["gder", "full", "static-random", "soft-random"])
def test_fit_predict_shapes(graphs, method):
    y = np.array(["a", "b"])[labels_of(graphs)]
    est = PrunedGraphClassifier(method=method, epochs=3, remain_ratio=0.5).fit(graphs, y)
    assert set(est.predict(graphs)) <= {"a", "b"}
    proba = est.predict_proba(graphs)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    Z = est.transform(graphs)
    np.testing.assert_allclose(np.linalg.norm(Z, axis=1), 1.0)
    sizes = {len(info.selected) for info in est.history_}
    assert sizes == ({40} if method == "full" else {20})


def test_static_random_keeps_one_subset(graphs):
    est = PrunedGraphClassifier(method="static-random", epochs=4).fit(graphs, labels_of(graphs))
    first = est.history_[0].selected
    assert all(np.array_equal(first, h.selected) for h in est.history_)


def test_unsupervised_ignores_labels(graphs):
    est = PrunedGraphClassifier(mode="unsupervised", n_virtual_classes=3, epochs=3, lambda3=0.01)
    est.fit(graphs)
    assert est.bank_.n_classes == 3
    assert set(est.predict(graphs)) <= {0, 1, 2}
    assert est.history_[-1].losses.task == 0.0
    assert est.history_[-1].losses.contrastive > 0


def test_fit_is_deterministic(graphs):
    a = PrunedGraphClassifier(epochs=5, random_state=3).fit(graphs, labels_of(graphs))
    b = PrunedGraphClassifier(epochs=5, random_state=3).fit(graphs, labels_of(graphs))
    np.testing.assert_array_equal(a.transform(graphs), b.transform(graphs))
    assert all(np.array_equal(x.selected, y.selected) for x, y in zip(a.history_, b.history_))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(method="bogus"),
        dict(mode="semi"),
        dict(remain_ratio=0.0),
        dict(remain_ratio=1.2),
        dict(optimizer="rmsprop"),
        dict(prototype_init="zeros"),
        dict(lr=0.0),
    ],
)
def test_invalid_parameters(graphs, kwargs):
    with pytest.raises(ValueError):
        PrunedGraphClassifier(epochs=1, **kwargs).fit(graphs, labels_of(graphs))


def test_input_validation(graphs):
    with pytest.raises(ValueError):
        PrunedGraphClassifier(epochs=1).fit([], [])
    with pytest.raises(TypeError):
        PrunedGraphClassifier(epochs=1).fit([np.eye(2)], [0])
    with pytest.raises(ValueError):
        PrunedGraphClassifier(epochs=1).fit(graphs, np.zeros(len(graphs)))
    with pytest.raises(ValueError):
        PrunedGraphClassifier(epochs=1).fit(graphs, [0, 1])
