"""Per-sample outlier, familiarity and balance scores and the sampling
weights built from them."""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import BadLabel, SingleClass
from .geometry import angular_distance, mahalanobis_sq, regularized_cov_inverse
from .prototypes import nearest_prototype

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class ScoringConfig:
    epsilon: float = 1e-6
    ridge: float = 1e-3
    standardize: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.ridge > 0:
            raise ValueError(f"ridge must be positive, got {self.ridge}")


@dataclass
class SampleScores:
    """Raw scores and the resulting unnormalized weight for a pool."""

    outlier: np.ndarray
    familiarity: np.ndarray
    balance: np.ndarray
    weight: np.ndarray


def _check_label(label, n_classes):
    if not 0 <= label < n_classes:
        raise BadLabel(f"label {label} outside [0, {n_classes})")


def class_cov_inverses(bank, ridge):
    """Regularized inverse covariance of each class's prototypes, (C, D, D)."""
    return np.stack([regularized_cov_inverse(bank.protos[c], ridge) for c in range(bank.n_classes)])


def outlier_score(z, label, bank, cfg, cov_inv=None):
    """Largest squared Mahalanobis distance from ``z`` to its own class's
    prototypes. Pass precomputed ``cov_inv`` (from ``class_cov_inverses``)
    when scoring many samples."""
    _check_label(label, bank.n_classes)
    inv = cov_inv[label] if cov_inv is not None else regularized_cov_inverse(bank.protos[label], cfg.ridge)
    return float(np.max(mahalanobis_sq(z, bank.protos[label], inv)))


def outlier_scores(Z, labels, bank, cfg):
    """Vectorized ``outlier_score`` over the rows of ``Z``."""
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    cov_inv = class_cov_inverses(bank, cfg.ridge)
    diff = Z[:, None, :] - bank.protos[labels]  # (N, K, D)
    d2 = np.einsum("nkd,nde,nke->nk", diff, cov_inv[labels], diff)
    return d2.max(axis=1)


def familiarity_score(z, label, bank, hcfg):
    """Summed angular distance to own-class prototypes over the summed
    distance to every other-class prototype. Small means familiar."""
    if bank.n_classes < 2:
        raise SingleClass("familiarity needs at least two classes")
    _check_label(label, bank.n_classes)
    dist = angular_distance(bank.protos, np.asarray(z, dtype=np.float64), hcfg.kappa)  # (C, K)
    own = dist[label].sum()
    return float(own / (dist.sum() - own))


def familiarity_scores(Z, labels, bank, hcfg):
    if bank.n_classes < 2:
        raise SingleClass("familiarity needs at least two classes")
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    dots = np.einsum("nd,ckd->nck", Z, bank.protos)
    dist = np.exp(-hcfg.kappa * dots).sum(axis=2)
    own = dist[np.arange(len(Z)), labels]
    return own / (dist.sum(axis=1) - own)


def balance_score(index, assignments):
    """Share of the pool whose nearest prototype matches sample ``index``'s."""
    assignments = np.asarray(assignments)
    return float(np.mean(assignments == assignments[index]))


def balance_scores(assignments):
    assignments = np.asarray(assignments)
    _, inverse, counts = np.unique(assignments, return_inverse=True, return_counts=True)
    return counts[inverse] / len(assignments)


def sigmoid_transform(raw, standardize=True):
    """Logistic squashing, optionally after z-scoring over the pool.

    A pool with (near-)zero variance maps to 0.5 everywhere.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if standardize:
        std = raw.std()
        if not std ** 2 >= VARIANCE_FLOOR:
            return np.full(raw.shape, 0.5)
        raw = (raw - raw.mean()) / std
    return expit(raw)


def sampling_weights(outlier, familiarity, balance, cfg):
    """Unnormalized sampling mass: high for unfamiliar, low-risk, minority
    samples."""
    eps = cfg.epsilon
    # saturated sigmoids must not zero out a sample's mass
    fam = np.maximum(sigmoid_transform(familiarity, cfg.standardize), np.finfo(np.float64).tiny)
    risk = sigmoid_transform(outlier, cfg.standardize)
    bal = sigmoid_transform(balance, cfg.standardize)
    return fam / ((risk + eps) * (bal + eps))


def score_pool(Z, labels, bank, hcfg, cfg):
    """All three raw scores and the sampling weights for one pool.

    ``labels`` are true labels in supervised mode, assigned virtual
    labels otherwise.
    """
    Z = np.asarray(Z, dtype=np.float64)
    outlier = outlier_scores(Z, labels, bank, cfg)
    familiarity = familiarity_scores(Z, labels, bank, hcfg)
    balance = balance_scores(nearest_prototype(Z, bank))
    weight = sampling_weights(outlier, familiarity, balance, cfg)
    return SampleScores(outlier, familiarity, balance, weight)
