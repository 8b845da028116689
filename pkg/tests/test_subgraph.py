import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_snapshot
from oracles import enclosing_set, labels_brute, random_graph
from strgnn.graph import TemporalEdge, build_snapshots
from strgnn.subgraph import (
    CandidateEdge,
    EnclosingSubgraphWindow,
    WindowError,
    encode_features,
    extract_enclosing_subgraph,
    extract_window,
    label_from_distances,
    label_nodes,
    labeled_subgraph,
)

INF = np.inf


def test_enclosing_examples(path4):
    assert set(extract_enclosing_subgraph(path4, 1, 2, 1).tolist()) == {0, 1, 2, 3}
    assert set(extract_enclosing_subgraph(path4, 0, 1, 1).tolist()) == {0, 1, 2}
    iso = make_snapshot(8, [(0, 1)])
    assert set(extract_enclosing_subgraph(iso, 4, 7, 1).tolist()) == {4, 7}


def test_hop_count_validated(path4):
    with pytest.raises(ValueError):
        extract_enclosing_subgraph(path4, 0, 1, 0)


@pytest.mark.parametrize(
    "dx, dy, expected",
    [
        (0, 2, 1),  # centre
        (1, 1, 2),
        (1, 2, 3),
        (2, 1, 3),
        (2, 2, 5),  # 1 + 2 + 2*(2+0-1)
        (1, 3, 4),  # 1 + 1 + 2*(2+0-1)
        (1, INF, 0),
        (INF, INF, 0),
    ],
)
def test_label_formula(dx, dy, expected):
    assert label_from_distances([dx], [dy]).tolist() == [expected]


def test_label_nodes_excludes_target_edge(triangle):
    # with (0,1) removed, node 2 is at distance 1 from both centres
    assert label_nodes(3, triangle.edges, 0, 1).tolist() == [1, 1, 2]


def test_node_reachable_from_one_centre_only():
    # 0-2 path, 1 isolated: all labels 0 because the centres are mutually unreachable
    assert label_nodes(3, np.array([[0, 2]]), 0, 1).tolist() == [0, 0, 0]


def test_encode_features():
    assert encode_features([1, 1, 2], 4).tolist() == [[0, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]]
    assert encode_features([9], 4).tolist() == [[0, 0, 0, 1]]
    assert encode_features([0], 4).tolist() == [[1, 0, 0, 0]]
    with pytest.raises(ValueError):
        encode_features([0], 1)


@settings(max_examples=80, deadline=None)
@given(n=st.integers(2, 40), p=st.floats(0.02, 0.4), seed=st.integers(0, 2**32 - 1))
def test_labels_match_brute_force(n, p, seed):
    rng = np.random.default_rng(seed)
    edges = random_graph(rng, n, p)
    x, y = (int(v) for v in rng.choice(n, 2, replace=False))
    got = label_nodes(n, np.array(edges, dtype=np.int64).reshape(-1, 2), x, y)
    assert got.tolist() == labels_brute(n, edges, x, y)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 50), p=st.floats(0.0, 0.3), seed=st.integers(0, 2**32 - 1), h=st.integers(1, 3))
def test_enclosing_matches_definition(n, p, seed, h):
    rng = np.random.default_rng(seed)
    edges = random_graph(rng, n, p)
    x, y = (int(v) for v in rng.choice(n, 2, replace=False))
    snap = make_snapshot(n, edges)
    assert set(extract_enclosing_subgraph(snap, x, y, h).tolist()) == enclosing_set(n, edges, x, y, h)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 30), p=st.floats(0.05, 0.4), seed=st.integers(0, 2**32 - 1))
def test_labels_symmetric_and_permutation_invariant(n, p, seed):
    rng = np.random.default_rng(seed)
    edges = np.array(random_graph(rng, n, p), dtype=np.int64).reshape(-1, 2)
    x, y = (int(v) for v in rng.choice(n, 2, replace=False))
    base = label_nodes(n, edges, x, y)
    assert label_nodes(n, edges, y, x).tolist() == base.tolist()
    perm = rng.permutation(n)  # new id of old node i is perm[i]
    relabelled = perm[edges] if len(edges) else edges
    rng.shuffle(relabelled)
    moved = label_nodes(n, relabelled, int(perm[x]), int(perm[y]))
    assert moved[perm].tolist() == base.tolist()


@settings(max_examples=60, deadline=None)
@given(n=st.integers(3, 40), p=st.floats(0.05, 0.5), seed=st.integers(0, 2**32 - 1))
def test_one_hop_labels_have_unit_min_distance(n, p, seed):
    # at h=1 every non-centre node is adjacent to a centre, so min(dx, dy) = 1
    rng = np.random.default_rng(seed)
    snap = make_snapshot(n, random_graph(rng, n, p))
    x, y = (int(v) for v in rng.choice(n, 2, replace=False))
    g = labeled_subgraph(snap, x, y, 1)
    allowed = {0, 1} | {2 + (s // 2) * ((s // 2) + s % 2 - 1) for s in range(2, 2 * n + 2)}
    assert set(g.labels.tolist()) <= allowed
    others = [i for i in range(g.num_nodes) if i not in g.center_local]
    assert all(g.labels[i] != 1 for i in others)


def test_one_hop_label_can_exceed_three():
    # x-i, x-b, b-y: i is adjacent to x and three steps from y once x-y is ignored
    snap = make_snapshot(4, [(0, 2), (0, 3), (3, 1), (0, 1)])
    g = labeled_subgraph(snap, 0, 1, 1)
    assert g.labels[list(g.nodes).index(2)] == 4


def _graph(edge_lists):
    edges = [TemporalEdge(a, b, t) for t, es in enumerate(edge_lists) for a, b in es]
    return build_snapshots(edges, len(edge_lists), num_nodes=8)


def test_window_lengths(small_dynamic_graph):
    g, _ = small_dynamic_graph
    assert len(extract_window(g, CandidateEdge(0, 1, 3), 1, 0).subgraphs) == 1
    win = extract_window(g, CandidateEdge(0, 1, 5), 1, 5)
    assert len(win.subgraphs) == 6
    with pytest.raises(WindowError):
        extract_window(g, CandidateEdge(0, 1, 4), 1, 5)


def test_window_isolated_centres_and_target_hidden():
    g = _graph([[(2, 3), (3, 4)], [(0, 1), (1, 2)]])
    win = extract_window(g, CandidateEdge(0, 1, 1), 1, 1)
    old, cur = win.subgraphs
    assert old.nodes.tolist() == [0, 1] and old.labels.tolist() == [0, 0]
    # (0,1) exists in the current snapshot but is not visible to the model
    assert cur.edges.tolist() == [[1, 2]]
    assert cur.labels.tolist() == [0, 0, 0]


def test_window_keeps_past_occurrences():
    g = _graph([[(0, 1)], [(0, 1), (1, 2)]])
    old, cur = extract_window(g, CandidateEdge(0, 1, 1), 1, 1).subgraphs
    assert old.edges.tolist() == [[0, 1]]
    assert [0, 1] not in cur.edges.tolist()


def test_window_json_round_trip(small_dynamic_graph):
    g, _ = small_dynamic_graph
    win = extract_window(g, CandidateEdge(2, 6, 7, 1), 2, 3)
    text = win.to_json()
    back = EnclosingSubgraphWindow.from_json(text)
    assert back.to_json() == text
    assert back.candidate == win.candidate


def test_permuted_subgraph_bookkeeping(small_dynamic_graph):
    g, _ = small_dynamic_graph
    sub = extract_window(g, CandidateEdge(2, 6, 7), 2, 0).subgraphs[0]
    perm = np.random.default_rng(0).permutation(sub.num_nodes)
    moved = sub.permuted(perm)
    assert moved.canonical().to_dict() == sub.to_dict()
