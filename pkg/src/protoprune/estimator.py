"""Scikit-learn style graph classifier trained on a dynamically pruned
subset of its training set."""

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import encoder as enc
from .geometry import HypersphereConfig
from .prototypes import (
    ClusterConcentration,
    LossWeights,
    PrototypeBank,
    apply_prototype_update,
    assign_class,
    class_assignment_probs,
    estimate_concentration,
    nearest_prototype,
    prototype_gradients,
)
from .sampler import (
    SchedulerConfig,
    SelectionState,
    budget_for,
    select_next_epoch,
    weighted_sample_without_replacement,
)
from .scoring import ScoringConfig, score_pool
from .validation import check_graphs, check_graph_labels

METHODS = ("gder", "full", "static-random", "soft-random")
MODES = ("supervised", "unsupervised")


@dataclass
class LossReport:
    task: float = 0.0
    compactness: float = 0.0
    separation: float = 0.0
    contrastive: float = 0.0
    total: float = 0.0

    @classmethod
    def combine(cls, task, terms, weights):
        total = (
            task
            + weights.lambda1 * terms["compactness"]
            + weights.lambda2 * terms["separation"]
            + weights.lambda3 * terms["contrastive"]
        )
        return cls(task, terms["compactness"], terms["separation"], terms["contrastive"], total)


@dataclass
class EpochInfo:
    """What happened in one training epoch; passed to ``epoch_callback``."""

    epoch: int
    selected: np.ndarray
    losses: LossReport
    train_time: float
    budget: int


class PrunedGraphClassifier(ClassifierMixin, TransformerMixin, BaseEstimator):
    """GCN graph classifier with prototype-guided dynamic data pruning.

    Each epoch trains on a budget of ``round(remain_ratio * n)`` graphs.
    With ``method="gder"`` the next subset is drawn from scores computed on
    a learned bank of hyperspherical class prototypes; the other methods
    are baselines (``full``, ``static-random``, ``soft-random``).

    ``X`` is a list of ``GraphSample`` objects. In ``mode="unsupervised"``
    labels are ignored during training and ``n_virtual_classes`` prototype
    groups are learned instead; ``predict`` then returns virtual labels.

    ``prototype_init="auto"`` draws random prototypes when labels are
    available and seeds them by k-means on the untrained embeddings
    otherwise. Random prototypes carve the embedding cloud arbitrarily, and
    self-assigned labels then reinforce whatever split they happen to make.

    ``transform`` returns the unit-norm embeddings ``z``.
    """

    def __init__(
        self,
        method="gder",
        remain_ratio=0.5,
        epochs=100,
        hidden_dim=64,
        n_layers=3,
        embed_dim=32,
        protos_per_class=2,
        tau=1e-4,
        kappa=1.0,
        lambda1=0.1,
        lambda2=0.1,
        lambda3=0.0,
        varsigma=0.7,
        decay=2.0,
        epsilon=1e-6,
        ridge=1e-3,
        standardize=True,
        lr=0.01,
        proto_lr=None,
        optimizer="sgd",
        batch_size=32,
        mode="supervised",
        n_virtual_classes=None,
        nce_alpha=10.0,
        prototype_init="auto",
        random_state=0,
        epoch_callback=None,
    ):
        self.method = method
        self.remain_ratio = remain_ratio
        self.epochs = epochs
        self.hidden_dim = hidden_dim
        self.n_layers = n_layers
        self.embed_dim = embed_dim
        self.protos_per_class = protos_per_class
        self.tau = tau
        self.kappa = kappa
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.lambda3 = lambda3
        self.varsigma = varsigma
        self.decay = decay
        self.epsilon = epsilon
        self.ridge = ridge
        self.standardize = standardize
        self.lr = lr
        self.proto_lr = proto_lr
        self.optimizer = optimizer
        self.batch_size = batch_size
        self.mode = mode
        self.n_virtual_classes = n_virtual_classes
        self.nce_alpha = nce_alpha
        self.prototype_init = prototype_init
        self.random_state = random_state
        self.epoch_callback = epoch_callback

    # ------------------------------------------------------------ validation

    def _validate_params(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.remain_ratio <= 1:
            raise ValueError(f"remain_ratio must be in (0, 1], got {self.remain_ratio}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.prototype_init not in ("auto", "random", "kmeans"):
            raise ValueError(f"prototype_init must be 'auto', 'random' or 'kmeans', got {self.prototype_init!r}")
        if not self.lr > 0:
            raise ValueError("lr must be positive")

    # ------------------------------------------------------------------- fit

    def fit(self, X, y=None):
        self._validate_params()
        graphs = check_graphs(X)
        supervised = self.mode == "supervised"
        if supervised:
            self.classes_, labels = check_graph_labels(graphs, y)
            n_classes = len(self.classes_)
        else:
            n_classes = self.n_virtual_classes or 2
            self.classes_ = np.arange(n_classes)
            labels = None
        self.n_features_in_ = graphs[0].features.shape[1]

        rng = np.random.default_rng(self.random_state)
        self.hcfg_ = HypersphereConfig(self.embed_dim, self.kappa, self.tau)
        self.weights_ = LossWeights(self.lambda1, self.lambda2, self.lambda3 if not supervised else 0.0)
        scfg = ScoringConfig(self.epsilon, self.ridge, self.standardize)
        sched = SchedulerConfig(self.varsigma, self.decay, self.epochs)
        self.params_ = enc.EncoderParams.init(
            self.n_features_in_, self.hidden_dim, self.n_layers, self.embed_dim, n_classes, rng
        )
        store = enc.GraphStore(graphs)
        init = self.prototype_init
        if init == "kmeans" or (init == "auto" and not supervised):
            z0 = enc.forward(store.batch(), self.params_).z
            self.bank_ = PrototypeBank.from_embeddings(z0, n_classes, self.protos_per_class, rng)
        else:
            self.bank_ = PrototypeBank.random(n_classes, self.protos_per_class, self.embed_dim, rng)
        opt = enc.Adam(self.lr) if self.optimizer == "adam" else None
        proto_lr = self.proto_lr or self.lr
        conc = None if supervised else ClusterConcentration.constant(self.bank_)

        n = len(graphs)
        budget = n if self.method == "full" else budget_for(n, self.remain_ratio)
        state = SelectionState.initial(n, budget, rng) if self.method == "gder" else None
        static = (
            weighted_sample_without_replacement(np.arange(n), np.ones(n), budget, rng)
            if self.method == "static-random"
            else None
        )
        self.history_ = []

        for epoch in range(self.epochs):
            start = time.perf_counter()
            if self.method == "full":
                selected = np.arange(n)
            elif self.method == "static-random":
                selected = static
            elif self.method == "soft-random":
                selected = weighted_sample_without_replacement(np.arange(n), np.ones(n), budget, rng)
            else:
                selected = state.retained

            order = rng.permutation(selected)
            Z_epoch = np.empty((n, self.embed_dim))
            sums = np.zeros(5)
            for lo in range(0, len(order), self.batch_size):
                idx = order[lo : lo + self.batch_size]
                cache = enc.forward(store.batch(idx), self.params_)
                Z_epoch[idx] = cache.z
                if supervised:
                    y_b = labels[idx]
                    task = enc.task_loss(cache.logits, y_b)
                    grad_logits = enc.task_loss_grad(cache.logits, y_b)
                else:
                    y_b = assign_class(cache.z, self.bank_, self.hcfg_)
                    task = 0.0
                    grad_logits = np.zeros_like(cache.logits)
                gP, gZ, terms = prototype_gradients(
                    cache.z, y_b, self.bank_, self.hcfg_, self.weights_, conc
                )
                report = LossReport.combine(task, terms, self.weights_)
                sums += len(idx) * np.array(
                    [report.task, report.compactness, report.separation, report.contrastive, report.total]
                )
                grads = enc.backward(cache, self.params_, grad_logits, gZ)
                self.params_ = opt.step(self.params_, grads) if opt else enc.sgd_step(self.params_, grads, self.lr)
                self.bank_ = apply_prototype_update(self.bank_, gP, proto_lr)

            Z_sel = Z_epoch[selected]
            if not supervised:
                conc = estimate_concentration(
                    Z_sel, nearest_prototype(Z_sel, self.bank_), self.bank_, self.nce_alpha
                )
            if self.method == "gder":
                pool_labels = labels[selected] if supervised else assign_class(Z_sel, self.bank_, self.hcfg_)
                scores = score_pool(Z_sel, pool_labels, self.bank_, self.hcfg_, scfg)
                state = select_next_epoch(state, scores.weight, sched, rng)
            elapsed = time.perf_counter() - start

            info = EpochInfo(epoch, selected, LossReport(*(sums / len(selected))), elapsed, len(selected))
            self.history_.append(info)
            if self.epoch_callback is not None:
                self.epoch_callback(self, info)
        self.selection_state_ = state
        return self

    # -------------------------------------------------------------- inference

    def _forward(self, X):
        check_is_fitted(self, "params_")
        graphs = check_graphs(X)
        return enc.forward(enc.GraphStore(graphs).batch(), self.params_)

    def transform(self, X):
        return self._forward(X).z

    def decision_function(self, X):
        return self._forward(X).logits

    def predict_proba(self, X):
        if self.mode == "unsupervised":
            return class_assignment_probs(self.transform(X), self.bank_, self.hcfg_)
        return softmax(self.decision_function(X), axis=1)

    def predict(self, X):
        check_is_fitted(self, "params_")
        if self.mode == "unsupervised":
            return assign_class(self.transform(X), self.bank_, self.hcfg_)
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
