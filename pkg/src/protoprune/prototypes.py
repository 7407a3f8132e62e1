"""Trainable hyperspherical prototype bank.

The bank stores ``K`` unit-norm prototypes for each of ``C`` classes as a
``(C, K, D)`` array. Because every prototype shares one concentration,
the vMF normalizer cancels out of every ratio computed here, so only the
exponentiated dot products are ever evaluated.

Losses come paired with closed-form gradients (``*_grad`` functions); the
test-suite checks each against central finite differences.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from .exceptions import BadLabel, ModeError, SingleClass
from .geometry import project_to_sphere

CONC_FLOOR = 1e-3


@dataclass
class PrototypeBank:
    """``protos[c, k]`` is the k-th prototype of class c."""

    protos: np.ndarray
    grads: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.protos = np.asarray(self.protos, dtype=np.float64)
        if self.protos.ndim != 3:
            raise ValueError(f"protos must be (C, K, D), got shape {self.protos.shape}")
        if self.grads is None:
            self.grads = np.zeros_like(self.protos)

    @classmethod
    def random(cls, n_classes, protos_per_class, dim, rng, max_dot=0.9, max_tries=1000):
        """Gaussian draws projected to the sphere, redrawn until no two
        prototypes have a dot product of ``max_dot`` or more."""
        n = n_classes * protos_per_class
        for _ in range(max_tries):
            flat = project_to_sphere(rng.standard_normal((n, dim)))
            gram = flat @ flat.T
            np.fill_diagonal(gram, -np.inf)
            if n == 1 or gram.max() < max_dot:
                return cls(flat.reshape(n_classes, protos_per_class, dim))
        raise RuntimeError(
            f"could not place {n} prototypes in {dim} dims with pairwise dot < {max_dot}"
        )

    @classmethod
    def from_embeddings(cls, Z, n_classes, protos_per_class, rng):
        """Seed from data: k-means splits ``Z`` into ``n_classes`` groups,
        then each group is split again into ``protos_per_class`` centers.
        Groups too small to split repeat their center."""
        from sklearn.cluster import KMeans

        Z = np.asarray(Z, dtype=np.float64)
        if len(Z) < n_classes:
            raise ValueError(f"need at least {n_classes} embeddings, got {len(Z)}")
        seed = int(rng.integers(2**31 - 1))
        outer = KMeans(n_classes, n_init=10, random_state=seed).fit(Z)
        protos = np.empty((n_classes, protos_per_class, Z.shape[1]))
        for c in range(n_classes):
            members = Z[outer.labels_ == c]
            if len(np.unique(members, axis=0)) >= protos_per_class:
                centers = KMeans(protos_per_class, n_init=4, random_state=seed).fit(members).cluster_centers_
            else:
                centers = np.repeat(outer.cluster_centers_[c : c + 1], protos_per_class, axis=0)
            protos[c] = project_to_sphere(centers)
        return cls(protos)

    @property
    def n_classes(self):
        return self.protos.shape[0]

    @property
    def protos_per_class(self):
        return self.protos.shape[1]

    @property
    def dim(self):
        return self.protos.shape[2]

    @property
    def flat(self):
        """The prototypes as an ``(C*K, D)`` view; row ``c*K + k``."""
        return self.protos.reshape(-1, self.dim)

    def copy(self):
        return PrototypeBank(self.protos.copy(), self.grads.copy())


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.1
    lambda2: float = 0.1
    lambda3: float = 0.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


def _as_batch(z):
    z = np.asarray(z, dtype=np.float64)
    return z[None, :] if z.ndim == 1 else z


def _check_labels(labels, n_classes):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise BadLabel(f"labels must lie in [0, {n_classes}), got {labels.min()}..{labels.max()}")
    return labels


def _logits(Z, bank, tau):
    # (N, C, K)
    return np.einsum("nd,ckd->nck", Z, bank.protos) / tau


def class_log_probs_from_logits(logits):
    """Per-class log-probabilities from ``(N, C, K)`` prototype logits."""
    per_class = logsumexp(logits, axis=2)
    return per_class - logsumexp(per_class, axis=1, keepdims=True)


def class_assignment_probs(z, bank, cfg):
    """Probability of each class given embedding(s) ``z``.

    Returns a length-C vector for a single point or ``(N, C)`` for a batch.
    """
    Z = _as_batch(z)
    probs = np.exp(class_log_probs_from_logits(_logits(Z, bank, cfg.tau)))
    return probs[0] if np.ndim(z) == 1 else probs


def assign_class(z, bank, cfg):
    """Most probable class; ``np.argmax`` breaks ties toward the lowest index."""
    Z = _as_batch(z)
    labels = np.argmax(class_log_probs_from_logits(_logits(Z, bank, cfg.tau)), axis=1)
    return int(labels[0]) if np.ndim(z) == 1 else labels


def nearest_prototype(Z, bank):
    """Flat index ``c*K + k`` of the closest prototype for each row of Z."""
    return np.argmax(_as_batch(Z) @ bank.flat.T, axis=1)


def compactness_loss(Z, labels, bank, cfg):
    labels = _check_labels(labels, bank.n_classes)
    if len(labels) == 0:
        return 0.0
    Z = _as_batch(Z)
    log_probs = class_log_probs_from_logits(_logits(Z, bank, cfg.tau))
    return float(-np.mean(log_probs[np.arange(len(labels)), labels]))


def compactness_grad(Z, labels, bank, cfg):
    """Returns ``(loss, dL/dprotos, dL/dZ)``."""
    Z = _as_batch(Z)
    labels = _check_labels(labels, bank.n_classes)
    n, (C, K, _) = len(labels), bank.protos.shape
    logits = _logits(Z, bank, cfg.tau)
    log_probs = class_log_probs_from_logits(logits)
    rows = np.arange(n)
    loss = -np.mean(log_probs[rows, labels])

    # dL_i/dlogit_ck = q_ck - [c == y_i] r_k with q the joint softmax over
    # (c, k) and r the softmax over k restricted to class y_i
    q = softmax(logits.reshape(n, C * K), axis=1).reshape(n, C, K)
    g = q.copy()
    g[rows, labels] -= softmax(logits[rows, labels], axis=1)
    g /= n * cfg.tau
    grad_Z = np.einsum("nck,ckd->nd", g, bank.protos)
    grad_P = np.einsum("nck,nd->ckd", g, Z)
    return float(loss), grad_P, grad_Z


def _separation_terms(bank, tau):
    C, K, _ = bank.protos.shape
    if C < 2:
        raise SingleClass("separation loss needs at least two classes")
    flat = bank.flat
    gram = flat @ flat.T / tau
    cls = np.repeat(np.arange(C), K)
    same = cls[:, None] == cls[None, :]
    masked = np.where(same, -np.inf, gram)
    return flat, masked, np.log((C - 1) * K)


def separation_loss(bank, cfg):
    """Mean over prototypes of the log-mean-exp similarity to every
    prototype of every other class."""
    _, masked, log_count = _separation_terms(bank, cfg.tau)
    return float(np.mean(logsumexp(masked, axis=1) - log_count))


def separation_grad(bank, cfg):
    """Returns ``(loss, dL/dprotos)``."""
    flat, masked, log_count = _separation_terms(bank, cfg.tau)
    m = flat.shape[0]
    loss = np.mean(logsumexp(masked, axis=1) - log_count)
    w = softmax(masked, axis=1) / m
    grad_flat = (w + w.T) @ flat / cfg.tau
    return float(loss), grad_flat.reshape(bank.protos.shape)


@dataclass
class ClusterConcentration:
    """Per-prototype concentration ``phi`` with shape ``(C, K)``."""

    phi: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.float64)
        if np.any(self.phi <= 0):
            raise ValueError("concentrations must be positive")

    @classmethod
    def constant(cls, bank, value=1.0):
        return cls(np.full(bank.protos.shape[:2], float(value)))


def estimate_concentration(Z, assignments, bank, alpha=10.0):
    """Concentration of the samples around each prototype.

    ``assignments`` holds the flat prototype index of every row of ``Z``.
    A prototype with ``n`` members at Euclidean distances ``d_i`` gets
    ``sum(d_i) / (n * log(n + alpha))``, floored at ``CONC_FLOOR``. Empty
    prototypes take the median of the non-empty ones (1.0 if none).
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    Z = np.asarray(Z, dtype=np.float64).reshape(-1, bank.dim)
    assignments = np.asarray(assignments, dtype=np.int64)
    flat = bank.flat
    phi = np.full(flat.shape[0], np.nan)
    for j in range(flat.shape[0]):
        members = Z[assignments == j]
        if len(members):
            n = len(members)
            dist = np.linalg.norm(members - flat[j], axis=1).sum()
            phi[j] = max(dist / (n * np.log(n + alpha)), CONC_FLOOR)
    filled = ~np.isnan(phi)
    phi[~filled] = np.median(phi[filled]) if filled.any() else 1.0
    return ClusterConcentration(phi.reshape(bank.protos.shape[:2]))


def _nce_terms(Z, bank, conc):
    if conc is None:
        # concentrations are only estimated when training without labels
        raise ModeError("contrastive loss needs cluster concentrations (unsupervised mode)")
    C, K, _ = bank.protos.shape
    logits = np.einsum("nd,ckd->nck", Z, bank.protos) / conc.phi[None]
    return logits, C, K


def proto_nce_loss(Z, bank, conc):
    """Concentration-scaled prototypical contrastive loss, summed over rows
    of ``Z`` and averaged over classes; the denominator spans all C*K
    prototypes."""
    Z = _as_batch(Z)
    logits, C, K = _nce_terms(Z, bank, conc)
    if len(Z) == 0:
        return 0.0
    total = logsumexp(logits.reshape(len(Z), C * K), axis=1)
    per_class = logsumexp(logits, axis=2)
    return float(np.sum(total - per_class.mean(axis=1)))


def proto_nce_grad(Z, bank, conc):
    """Returns ``(loss, dL/dprotos, dL/dZ)``."""
    Z = _as_batch(Z)
    logits, C, K = _nce_terms(Z, bank, conc)
    n = len(Z)
    flat_logits = logits.reshape(n, C * K)
    loss = np.sum(logsumexp(flat_logits, axis=1) - logsumexp(logits, axis=2).mean(axis=1))
    g = softmax(flat_logits, axis=1).reshape(n, C, K) - softmax(logits, axis=2) / C
    g = g / conc.phi[None]
    grad_Z = np.einsum("nck,ckd->nd", g, bank.protos)
    grad_P = np.einsum("nck,nd->ckd", g, Z)
    return float(loss), grad_P, grad_Z


def prototype_gradients(Z, labels, bank, cfg, weights, conc=None):
    """Gradients of ``lambda1*compact + lambda2*separate (+ lambda3*nce)``.

    The contrastive term is included only when ``conc`` is given. Returns
    ``(grad_protos, grad_Z, terms)`` where ``terms`` maps each loss name to
    its unweighted value.
    """
    Z = _as_batch(Z)
    grad_P = np.zeros_like(bank.protos)
    grad_Z = np.zeros_like(Z)
    terms = {"compactness": 0.0, "separation": 0.0, "contrastive": 0.0}

    loss, gP, gZ = compactness_grad(Z, labels, bank, cfg)
    terms["compactness"] = loss
    grad_P += weights.lambda1 * gP
    grad_Z += weights.lambda1 * gZ

    if bank.n_classes >= 2:
        loss, gP = separation_grad(bank, cfg)
        terms["separation"] = loss
        grad_P += weights.lambda2 * gP

    if conc is not None:
        loss, gP, gZ = proto_nce_grad(Z, bank, conc)
        terms["contrastive"] = loss
        grad_P += weights.lambda3 * gP
        grad_Z += weights.lambda3 * gZ
    return grad_P, grad_Z, terms


def apply_prototype_update(bank, grads, lr):
    """Plain gradient step followed by re-projection onto the sphere."""
    if not lr > 0:
        raise ValueError(f"lr must be positive, got {lr}")
    stepped = bank.protos - lr * np.asarray(grads, dtype=np.float64)
    protos = project_to_sphere(stepped.reshape(-1, bank.dim)).reshape(bank.protos.shape)
    return PrototypeBank(protos)
