"""Graph structural feature extraction: stacked GCN layers + SortPooling.

Many subgraphs are processed at once as one block-diagonal graph; the
normalised adjacency of the block is a scipy sparse matrix treated as a
constant by the tape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .subgraph import LabeledSubgraph, encode_features


class ConfigError(ValueError):
    pass


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape or (fan_in, fan_out))


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` for a dense symmetric 0/1 matrix."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.array_equal(a, a.T):
        raise ValueError("adjacency must be a symmetric square matrix")
    a_hat = a + np.eye(len(a))
    d = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * d[:, None] * d[None, :]


def normalized_block(subgraphs: Sequence[LabeledSubgraph]) -> sp.csr_matrix:
    """Sparse block-diagonal normalised adjacency of many subgraphs."""
    sizes = np.array([g.num_nodes for g in subgraphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    n = int(sizes.sum())
    pairs = [g.edges + off for g, off in zip(subgraphs, offsets) if len(g.edges)]
    e = np.concatenate(pairs) if pairs else np.zeros((0, 2), np.int64)
    deg = 1.0 + np.bincount(e.ravel(), minlength=n)
    inv = 1.0 / np.sqrt(deg)
    rows = np.concatenate([e[:, 0], e[:, 1], np.arange(n)])
    cols = np.concatenate([e[:, 1], e[:, 0], np.arange(n)])
    vals = inv[rows] * inv[cols]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class GcnLayer:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str = "gcn"):
        self.W = Parameter(glorot(rng, in_dim, out_dim), name=name)

    @property
    def in_dim(self) -> int:
        return self.W.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W.shape[1]


def gcn_forward(x: Tensor, a_norm, layer: GcnLayer) -> Tensor:
    if x.shape[0] != a_norm.shape[0]:
        raise ad.ShapeError(f"features have {x.shape[0]} rows, adjacency is {a_norm.shape}")
    return ad.relu(ad.propagate(a_norm, ad.matmul(x, layer.W)))


def stack_layers(x: Tensor, a_norm, layers: Sequence[GcnLayer]) -> Tensor:
    outs = []
    h = x
    for layer in layers:
        h = gcn_forward(h, a_norm, layer)
        outs.append(h)
    return ad.concat(outs, axis=1)


def sort_order(scores: np.ndarray, sizes: Sequence[int], k: int) -> np.ndarray:
    """Gather index (len ``G*k``) of the top-``k`` rows per graph, -1 for padding.

    Descending score; ties go to the lower local index.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    sizes = np.asarray(sizes, dtype=np.int64)
    g = len(sizes)
    gid = np.repeat(np.arange(g), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    local = np.arange(len(scores)) - starts[gid]
    order = np.lexsort((local, -scores, gid))
    rank = np.arange(len(order)) - starts[gid[order]]
    keep = rank < k
    index = np.full(g * k, -1, dtype=np.int64)
    index[gid[order[keep]] * k + rank[keep]] = order[keep]
    return index


def min_score_gap(scores: np.ndarray, sizes: Sequence[int]) -> float:
    """Smallest difference between two scores of the same graph."""
    scores = np.asarray(scores).reshape(-1)
    best = math.inf
    start = 0
    for n in sizes:
        s = np.sort(scores[start : start + n])
        if n > 1:
            best = min(best, float(np.min(np.diff(s))))
        start += n
    return best


@dataclass
class SortPoolConfig:
    k: int
    scorer: Parameter  # d x 1


def sortpool(h: Tensor, a_norm, cfg: SortPoolConfig, sizes: Sequence[int] | None = None) -> tuple[Tensor, np.ndarray]:
    """Fixed-size readout: ``(G*k) x d`` rows plus the per-node scores.

    Each kept row is scaled by its sigmoid score so the scorer is trained;
    the ordering itself is a constant for backprop.
    """
    if h.shape[1] != cfg.scorer.shape[0]:
        raise ad.ShapeError(f"features have width {h.shape[1]}, scorer expects {cfg.scorer.shape[0]}")
    sizes = [h.shape[0]] if sizes is None else sizes
    scores = ad.sigmoid(ad.propagate(a_norm, ad.matmul(h, cfg.scorer)))
    index = sort_order(scores.data, sizes, cfg.k)
    rows = ad.gather_rows(h, index)
    weights = ad.gather_rows(scores, index)
    return ad.scale_rows(rows, weights), scores.data.reshape(-1)


def determine_k(sizes: Sequence[int], rate: float) -> int:
    """Number of kept nodes such that a fraction ``rate`` of graphs has at least that many."""
    if not 0 < rate <= 1:
        raise ConfigError(f"sortpool rate must be in (0, 1], got {rate}")
    if len(sizes) == 0:
        raise ConfigError("cannot choose k from an empty set of subgraphs")
    ordered = sorted((int(s) for s in sizes), reverse=True)
    pos = max(1, math.ceil(rate * len(ordered) - 1e-9))
    return max(2, ordered[pos - 1])


class FeatureExtractor:
    """GCN stack + SortPooling applied to a list of labelled subgraphs."""

    def __init__(self, label_vocab: int, channels: Sequence[int], k: int, rng: np.random.Generator):
        self.label_vocab = label_vocab
        self.layers = []
        in_dim = label_vocab
        for i, c in enumerate(channels):
            self.layers.append(GcnLayer(in_dim, c, rng, name=f"gcn{i}.W"))
            in_dim = c
        self.feature_dim = int(sum(channels))
        self.pool = SortPoolConfig(k, Parameter(glorot(rng, self.feature_dim, 1), name="sortpool.W"))

    @property
    def k(self) -> int:
        return self.pool.k

    @property
    def output_dim(self) -> int:
        return self.pool.k * self.feature_dim

    def parameters(self) -> list[Parameter]:
        return [layer.W for layer in self.layers] + [self.pool.scorer]

    def node_features(self, subgraphs: Sequence[LabeledSubgraph]) -> np.ndarray:
        return np.concatenate([encode_features(g.labels, self.label_vocab) for g in subgraphs])

    def __call__(self, subgraphs: Sequence[LabeledSubgraph]) -> Tensor:
        """``G x (k*d)`` matrix, one flattened fixed-size feature per subgraph."""
        subgraphs = [g.canonical() for g in subgraphs]
        sizes = [g.num_nodes for g in subgraphs]
        a = normalized_block(subgraphs)
        x = Tensor(self.node_features(subgraphs))
        h = stack_layers(x, a, self.layers)
        pooled, _ = sortpool(h, a, self.pool, sizes)
        return ad.reshape(pooled, (len(subgraphs), self.output_dim))
