import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_snapshot
from oracles import floyd_warshall
from strgnn.graph import (
    ACCUMULATED,
    EQUAL_TIME,
    EdgeFileError,
    EmptyInputError,
    PartitionError,
    TemporalEdge,
    bfs_distances,
    build_snapshots,
    export_edges,
    format_edges,
    ingest_edge_stream,
    parse_edge_lines,
)


def test_ingest_interns_in_first_seen_order(tmp_path):
    f = tmp_path / "e.txt"
    f.write_text("a b 1\nb c 2")
    s = ingest_edge_stream(f)
    assert len(s.edges) == 2
    assert s.node_map == {"a": 0, "b": 1, "c": 2}
    assert s.edges[1] == TemporalEdge(1, 2, 2)


def test_self_loops_dropped_and_counted():
    s = parse_edge_lines(["a a 1"])
    assert s.edges == [] and s.self_loops == 1


def test_missing_timestamp_reports_line():
    with pytest.raises(EdgeFileError) as err:
        parse_edge_lines(["a b"])
    assert err.value.line_no == 1


def test_bad_label_and_negative_time():
    with pytest.raises(EdgeFileError, match="line 2"):
        parse_edge_lines(["a b 1", "a c 2 7"])
    with pytest.raises(EdgeFileError):
        parse_edge_lines(["a b -4"])


def test_empty_input(tmp_path):
    f = tmp_path / "e.txt"
    f.write_text("# only a comment\n\n")
    with pytest.raises(EmptyInputError):
        ingest_edge_stream(f)


def test_comma_separated_with_labels_and_comments():
    s = parse_edge_lines(["# header", "u1,u2,10,1", "u2, u3 ,11,0"])
    assert [e.label for e in s.edges] == [1, 0]
    assert s.node_keys() == ["u1", "u2", "u3"]


def test_duplicate_records_retained():
    s = parse_edge_lines(["a b 1", "a b 1"])
    assert len(s.edges) == 2


def test_export_round_trips_bit_exactly(tmp_path):
    text = "n7 n2 5\nn2 n9 5 1\nn9 n7 12 0\n"
    src = tmp_path / "in.txt"
    src.write_bytes(text.encode())
    s = ingest_edge_stream(src)
    out = tmp_path / "out.txt"
    export_edges(out, s.edges, s.node_keys())
    assert out.read_bytes() == src.read_bytes()
    again = ingest_edge_stream(out)
    assert again.edges == s.edges and again.node_map == s.node_map


def test_interning_is_stable(tmp_path):
    f = tmp_path / "e.txt"
    f.write_text("z y 3\nx z 1\ny w 2\n")
    assert ingest_edge_stream(f).node_map == ingest_edge_stream(f).node_map


def _chain_edges(n):
    return [TemporalEdge(i % 5, (i + 1) % 5 + 5, i) for i in range(n)]


@pytest.mark.parametrize("t, sizes", [(5, [2, 2, 2, 2, 2]), (3, [4, 3, 3])])
def test_equal_count_sizes(t, sizes):
    g = build_snapshots(_chain_edges(10), t)
    assert np.bincount(g.assignment).tolist() == sizes


def test_equal_count_orders_by_time():
    edges = [TemporalEdge(0, 1, 9), TemporalEdge(1, 2, 1), TemporalEdge(2, 3, 5), TemporalEdge(3, 4, 3)]
    g = build_snapshots(edges, 2)
    assert g.assignment.tolist() == [1, 0, 1, 0]


def test_accumulated_union():
    g = build_snapshots([TemporalEdge(0, 1, 0), TemporalEdge(1, 2, 1)], 2, mode=ACCUMULATED)
    assert g[0].edge_keys() == {0 * 3 + 1}
    assert g[1].has_edge(0, 1) and g[1].has_edge(2, 1)


def test_equal_time_partition():
    edges = [TemporalEdge(0, 1, t) for t in (0, 1, 2, 7, 8, 10)]
    g = build_snapshots(edges, 2, partition=EQUAL_TIME)
    assert g.assignment.tolist() == [0, 0, 0, 1, 1, 1]


def test_partition_errors():
    with pytest.raises(PartitionError):
        build_snapshots(_chain_edges(3), 4)
    with pytest.raises(PartitionError):
        build_snapshots(_chain_edges(3), 1)
    with pytest.raises(PartitionError):
        build_snapshots([], 2)


def test_snapshot_dedupes_and_symmetrises():
    s = make_snapshot(4, [(1, 0), (0, 1), (2, 3), (3, 2)])
    assert s.num_edges == 2
    assert s.neighbors(0).tolist() == [1] and s.neighbors(3).tolist() == [2]
    assert s.has_edge(3, 2) and not s.has_edge(0, 2)


def test_snapshot_of_time():
    edges = [TemporalEdge(0, 1, t) for t in (0, 1, 5, 6, 9, 10)]
    g = build_snapshots(edges, 3)
    assert [g.snapshot_of_time(t) for t in (0, 1, 5, 6, 9, 10, 50)] == [0, 0, 1, 1, 2, 2, 2]


def test_bfs_examples(path4, triangle):
    assert bfs_distances(path4, 0, 2) == {0: 0, 1: 1, 2: 2}
    iso = make_snapshot(6, [(0, 1)])
    assert bfs_distances(iso, 5, 3) == {5: 0}
    assert bfs_distances(triangle, 0, 5, excluded_edge=(0, 1)) == {0: 0, 2: 1, 1: 2}
    assert bfs_distances(triangle, 0, 5, excluded_edge=(1, 0)) == {0: 0, 2: 1, 1: 2}


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 50),
    p=st.floats(0.0, 0.3),
    seed=st.integers(0, 2**32 - 1),
    depth=st.integers(0, 6),
)
def test_bfs_matches_floyd_warshall(n, p, seed, depth):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    hit = rng.random(len(iu)) < p
    edges = list(zip(iu[hit].tolist(), ju[hit].tolist()))
    snap = make_snapshot(n, edges)
    d = floyd_warshall(n, edges)
    src = int(rng.integers(n))
    expected = {i: int(d[src][i]) for i in range(n) if d[src][i] <= depth}
    assert bfs_distances(snap, src, depth) == expected


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(0, 30)), min_size=4, max_size=60), st.integers(2, 4))
def test_snapshot_partition_preserves_edges(records, t):
    edges = [TemporalEdge(a, b, tm) for a, b, tm in records if a != b]
    if len(edges) < t:
        return
    g = build_snapshots(edges, t, num_nodes=10)
    # every record lands in exactly one snapshot and is present there
    assert len(g.assignment) == len(edges)
    for e, i in zip(edges, g.assignment.tolist()):
        assert g[i].has_edge(e.src, e.dst)
    total = sum(g[i].num_edges for i in range(t))
    per_snapshot_distinct = sum(
        len({(min(e.src, e.dst), max(e.src, e.dst)) for e, a in zip(edges, g.assignment) if a == i}) for i in range(t)
    )
    assert total == per_snapshot_distinct
    acc = build_snapshots(edges, t, mode=ACCUMULATED, num_nodes=10)
    for i in range(1, t):
        assert acc[i - 1].edge_keys() <= acc[i].edge_keys()


def test_format_edges_omits_unlabeled():
    edges = [TemporalEdge(0, 1, 3), TemporalEdge(1, 0, 4, 1)]
    assert format_edges(edges, ["a", "b"]) == "a b 3\nb a 4 1\n"
