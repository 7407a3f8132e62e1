"""Numpy GCN encoder with hand-written backpropagation.

A batch of graphs is packed into one block-diagonal sparse propagation
matrix ``D^-1/2 (A + I) D^-1/2`` so each layer is a single sparse product.
The pipeline is

    node states --L x (propagate, linear, ReLU)--> mean readout h
    --projector--> z' --normalize--> z --head--> class logits
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp, softmax

from .exceptions import BadLabel, EmptyGraph

# below this projector-output norm the embedding is left at zero
PROJ_NORM_FLOOR = 1e-12


def normalized_adjacency(adjacency):
    """Symmetric GCN propagation matrix with self-loops, as sparse CSR."""
    n = adjacency.shape[0]
    if n == 0:
        raise EmptyGraph("graph has no nodes")
    a_hat = sp.csr_matrix(adjacency, dtype=np.float64) + sp.identity(n, format="csr")
    d_inv_sqrt = 1.0 / np.sqrt(np.asarray(a_hat.sum(axis=1)).ravel())
    return sp.csr_matrix(sp.diags(d_inv_sqrt) @ a_hat @ sp.diags(d_inv_sqrt))


class GraphBatch:
    """Several graphs packed for one vectorized forward pass."""

    def __init__(self, adjs, features):
        sizes = np.array([f.shape[0] for f in features])
        if np.any(sizes == 0):
            raise EmptyGraph("graph has no nodes")
        self.propagate = sp.block_diag(adjs, format="csr")
        self.features = np.concatenate(features)
        rows = np.repeat(np.arange(len(sizes)), sizes)
        self.pool = sp.csr_matrix(
            (1.0 / sizes[rows], (rows, np.arange(len(rows)))), shape=(len(sizes), len(rows))
        )
        self.n_graphs = len(sizes)


class GraphStore:
    """Caches each graph's propagation matrix; hands out batches by index."""

    def __init__(self, graphs):
        self.graphs = list(graphs)
        self.adjs = [normalized_adjacency(g.adjacency) for g in self.graphs]
        self.feats = [g.features for g in self.graphs]

    def __len__(self):
        return len(self.graphs)

    def batch(self, indices=None):
        if indices is None:
            indices = range(len(self.graphs))
        return GraphBatch([self.adjs[i] for i in indices], [self.feats[i] for i in indices])


@dataclass
class EncoderParams:
    """``layers[l]`` is (in, out); ``proj`` is (E, D); ``head`` is (D, C)."""

    layers: list
    proj: np.ndarray
    head: np.ndarray

    @classmethod
    def init(cls, in_dim, hidden_dim, n_layers, embed_dim, n_classes, rng):
        """Glorot-uniform initialization."""
        if n_layers < 1:
            raise ValueError("need at least one message-passing layer")

        def glorot(fan_in, fan_out):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, size=(fan_in, fan_out))

        dims = [in_dim] + [hidden_dim] * n_layers
        layers = [glorot(dims[i], dims[i + 1]) for i in range(n_layers)]
        return cls(layers, glorot(hidden_dim, embed_dim), glorot(embed_dim, n_classes))

    def arrays(self):
        return [*self.layers, self.proj, self.head]

    @classmethod
    def from_arrays(cls, arrays):
        return cls(list(arrays[:-2]), arrays[-2], arrays[-1])

    def zeros_like(self):
        return EncoderParams.from_arrays([np.zeros_like(a) for a in self.arrays()])

    def copy(self):
        return EncoderParams.from_arrays([a.copy() for a in self.arrays()])


@dataclass
class ForwardCache:
    inputs: list  # propagated inputs to each linear map
    pre_acts: list
    h: np.ndarray
    z_raw: np.ndarray
    z_norm: np.ndarray
    z: np.ndarray
    logits: np.ndarray
    batch: GraphBatch


def forward(batch, params):
    """Run the encoder on a ``GraphBatch``; returns a ``ForwardCache``."""
    state = batch.features
    inputs, pre_acts = [], []
    for W in params.layers:
        mixed = batch.propagate @ state
        pre = mixed @ W
        inputs.append(mixed)
        pre_acts.append(pre)
        state = np.maximum(pre, 0.0)
    h = batch.pool @ state
    z_raw = h @ params.proj
    z_norm = np.linalg.norm(z_raw, axis=1, keepdims=True)
    z = z_raw / np.maximum(z_norm, PROJ_NORM_FLOOR)
    logits = z @ params.head
    return ForwardCache(inputs, pre_acts, h, z_raw, z_norm, z, logits, batch)


def embed_graph(graph, params):
    """Single-graph convenience: ``(node_states, h, z, logits)``."""
    cache = forward(GraphBatch([normalized_adjacency(graph.adjacency)], [graph.features]), params)
    node_states = np.maximum(cache.pre_acts[-1], 0.0)
    return node_states, cache.h[0], cache.z[0], cache.logits[0]


def task_loss(logits, labels):
    """Mean softmax cross-entropy. Accepts one logit vector or a batch."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise BadLabel(f"labels must lie in [0, {logits.shape[1]})")
    log_probs = logits - logsumexp(logits, axis=1, keepdims=True)
    return float(-np.mean(log_probs[np.arange(len(labels)), labels]))


def task_loss_grad(logits, labels):
    """Gradient of ``task_loss`` w.r.t. the (N, C) logits."""
    g = softmax(logits, axis=1)
    g[np.arange(len(labels)), labels] -= 1.0
    return g / len(labels)


def backward(cache, params, grad_logits, grad_z=None):
    """Backpropagate logit and embedding gradients to every parameter."""
    grad_head = cache.z.T @ grad_logits
    dz = grad_logits @ params.head.T
    if grad_z is not None:
        dz = dz + grad_z
    # Jacobian of z = z'/|z'| is (I - z z^T)/|z'|
    radial = np.sum(cache.z * dz, axis=1, keepdims=True)
    dz_raw = (dz - cache.z * radial) / np.maximum(cache.z_norm, PROJ_NORM_FLOOR)
    dz_raw[cache.z_norm[:, 0] < PROJ_NORM_FLOOR] = 0.0
    grad_proj = cache.h.T @ dz_raw
    d_state = cache.batch.pool.T @ (dz_raw @ params.proj.T)

    grad_layers = [None] * len(params.layers)
    for l in reversed(range(len(params.layers))):
        d_pre = d_state * (cache.pre_acts[l] > 0)
        grad_layers[l] = cache.inputs[l].T @ d_pre
        if l:
            # propagation matrix is symmetric
            d_state = cache.batch.propagate @ (d_pre @ params.layers[l].T)
    return EncoderParams(grad_layers, grad_proj, grad_head)


def sgd_step(params, grads, lr):
    if not lr > 0:
        raise ValueError(f"lr must be positive, got {lr}")
    return EncoderParams.from_arrays(
        [p - lr * g for p, g in zip(params.arrays(), grads.arrays())]
    )


class Adam:
    """Adam over an ``EncoderParams``; an alternative to plain SGD."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params, grads):
        arrays, garrays = params.arrays(), grads.arrays()
        if self.m is None:
            self.m = [np.zeros_like(a) for a in arrays]
            self.v = [np.zeros_like(a) for a in arrays]
        self.t += 1
        out = []
        for i, (p, g) in enumerate(zip(arrays, garrays)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1**self.t)
            v_hat = self.v[i] / (1 - self.beta2**self.t)
            out.append(p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return EncoderParams.from_arrays(out)
