import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from oracles import random_graph, spectral_radius
from strgnn import autodiff as ad
from strgnn.autodiff import Parameter, Tensor, finite_difference_check
from strgnn.gsfe import (
    ConfigError,
    FeatureExtractor,
    GcnLayer,
    SortPoolConfig,
    determine_k,
    gcn_forward,
    min_score_gap,
    normalize_adjacency,
    normalized_block,
    sort_order,
    sortpool,
    stack_layers,
)
from strgnn.subgraph import LabeledSubgraph, label_nodes


def _layer(w):
    layer = GcnLayer(1, 1, np.random.default_rng(0))
    layer.W = Parameter(np.asarray(w, dtype=float))
    return layer


def test_normalize_examples():
    assert normalize_adjacency(np.zeros((1, 1))).tolist() == [[1.0]]
    assert np.allclose(normalize_adjacency(np.array([[0, 1], [1, 0]])), 0.5)
    tri = np.ones((3, 3)) - np.eye(3)
    assert np.allclose(normalize_adjacency(tri), 1 / 3)
    with pytest.raises(ValueError):
        normalize_adjacency(np.array([[0, 1], [0, 0]]))


def _subgraph(n, edges):
    edges = np.array(sorted(tuple(sorted(e)) for e in edges), dtype=np.int64).reshape(-1, 2)
    return LabeledSubgraph(np.arange(n), edges, label_nodes(n, edges, 0, 1), (0, 1))


def test_block_matches_dense_blocks():
    rng = np.random.default_rng(4)
    graphs = [_subgraph(n, random_graph(rng, n, 0.4)) for n in (2, 5, 3, 7)]
    block = normalized_block(graphs).toarray()
    dense = scipy.linalg.block_diag(*[normalize_adjacency(g.dense_adjacency()) for g in graphs])
    assert np.allclose(block, dense, atol=1e-15)


def test_gcn_examples():
    one = gcn_forward(Tensor([[1.0, 0.0]]), np.array([[1.0]]), _layer(np.eye(2)))
    assert one.data.tolist() == [[1.0, 0.0]]
    a = normalize_adjacency(np.array([[0, 1], [1, 0]]))
    two = gcn_forward(Tensor(np.eye(2)), a, _layer(np.eye(2)))
    assert np.allclose(two.data, 0.5)
    zero = gcn_forward(Tensor(np.eye(2)), a, _layer(np.zeros((2, 3))))
    assert not zero.data.any()
    with pytest.raises(ad.ShapeError):
        gcn_forward(Tensor(np.eye(3)), a, _layer(np.eye(3)))


def test_stack_layers_examples():
    rng = np.random.default_rng(0)
    layers = [GcnLayer(4, 32, rng), GcnLayer(32, 32, rng), GcnLayer(32, 32, rng)]
    for layer in layers:
        layer.W.data[...] = 0
    a = normalize_adjacency(np.array([[0, 1], [1, 0]]))
    assert stack_layers(Tensor(np.eye(2, 4)), a, layers).data.tolist() == np.zeros((2, 96)).tolist()

    layers = [GcnLayer(4, 32, rng), GcnLayer(32, 32, rng), GcnLayer(32, 32, rng)]
    x = np.eye(1, 4)
    h1 = np.maximum(x @ layers[0].W.data, 0)
    h2 = np.maximum(h1 @ layers[1].W.data, 0)
    h3 = np.maximum(h2 @ layers[2].W.data, 0)
    got = stack_layers(Tensor(x), np.array([[1.0]]), layers).data
    assert np.array_equal(got, np.concatenate([h1, h2, h3], axis=1))


def test_sort_order_examples():
    assert sort_order([0.9, 0.1, 0.5], [3], 2).tolist() == [0, 2]
    assert sort_order([0.3, 0.3, 0.3, 0.3], [4], 3).tolist() == [0, 1, 2]
    assert sort_order([0.2, 0.7, 0.1, 0.4, 0.9], [2, 3], 3).tolist() == [1, 0, -1, 4, 3, 2]


def test_sortpool_pads_small_graphs():
    h = Tensor(np.arange(6.0).reshape(3, 2) + 1)
    cfg = SortPoolConfig(5, Parameter(np.array([[1.0], [-1.0]])))
    out, scores = sortpool(h, np.eye(3), cfg)
    assert out.shape == (5, 2)
    assert not out.data[3:].any()
    assert np.all(out.data[:3] != 0)


def test_determine_k():
    assert determine_k([3, 5, 7, 9, 11], 0.6) == 7
    assert determine_k([4] * 9, 0.3) == 4
    assert determine_k([2], 1.0) == 2
    assert determine_k([1, 1, 1], 0.5) == 2
    with pytest.raises(ConfigError):
        determine_k([], 0.6)
    with pytest.raises(ConfigError):
        determine_k([3], 0.0)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 30), p=st.floats(0.0, 0.6), seed=st.integers(0, 2**32 - 1))
def test_normalized_adjacency_spectrum(n, p, seed):
    rng = np.random.default_rng(seed)
    a = np.zeros((n, n))
    for i, j in random_graph(rng, n, p):
        a[i, j] = a[j, i] = 1
    m = normalize_adjacency(a)
    assert np.array_equal(m, m.T)
    assert spectral_radius(m) <= 1 + 1e-6


def _random_pool_case(rng, n, d=6, k=4):
    a = np.zeros((n, n))
    for i, j in random_graph(rng, n, 0.4):
        a[i, j] = a[j, i] = 1
    h = rng.normal(size=(n, d))
    cfg = SortPoolConfig(k, Parameter(rng.normal(size=(d, 1))))
    return normalize_adjacency(a), h, cfg


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 15), seed=st.integers(0, 2**32 - 1))
def test_sortpool_permutation_invariant(n, seed):
    rng = np.random.default_rng(seed)
    a, h, cfg = _random_pool_case(rng, n)
    out, scores = sortpool(Tensor(h), a, cfg)
    if min_score_gap(scores, [n]) < 1e-6:
        return
    perm = rng.permutation(n)
    out_p, _ = sortpool(Tensor(h[perm]), a[np.ix_(perm, perm)], cfg)
    assert np.allclose(out.data, out_p.data, rtol=0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_sortpool_rows_are_scaled_input_rows(n, seed):
    rng = np.random.default_rng(seed)
    a, h, cfg = _random_pool_case(rng, n)
    out, scores = sortpool(Tensor(h), a, cfg)
    for row in out.data:
        if not row.any():
            continue
        assert any(np.array_equal(row, h[i] * scores[i]) for i in range(n))


def test_extractor_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    graphs = [_subgraph(n, random_graph(rng, n, 0.5)) for n in (3, 6, 4)]
    fx = FeatureExtractor(label_vocab=5, channels=(4, 3, 2), k=4, rng=rng)
    target = Tensor(rng.normal(size=(3 * fx.output_dim, 1)))

    def loss():
        out = fx(graphs)
        return ad.sum_all(ad.tanh(ad.reshape(out, (1, 3 * fx.output_dim)) @ target))

    for p in fx.parameters():
        assert finite_difference_check(loss, p) < 1e-4


def test_extractor_is_order_independent_bitwise():
    rng = np.random.default_rng(8)
    g = _subgraph(7, random_graph(rng, 7, 0.5))
    fx = FeatureExtractor(label_vocab=6, channels=(32, 32, 32), k=5, rng=rng)
    base = fx([g]).data
    for _ in range(5):
        moved = g.permuted(rng.permutation(7))
        assert fx([moved]).data.tobytes() == base.tobytes()
