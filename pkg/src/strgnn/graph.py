"""Timestamped edge ingestion, snapshot partitioning and adjacency queries."""

from __future__ import annotations

import bisect
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NORMAL = 0
ANOMALOUS = 1
UNLABELED = -1

EQUAL_COUNT = "equal-count"
EQUAL_TIME = "equal-time"
TIME_EVOLVING = "time-evolving"
ACCUMULATED = "accumulated"

_SEP = re.compile(r"[,\s]+")


class GraphError(Exception):
    """Base class for graph-store failures."""


class EdgeFileError(GraphError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyInputError(GraphError):
    pass


class PartitionError(GraphError):
    pass


@dataclass(frozen=True)
class TemporalEdge:
    src: int
    dst: int
    time: int
    label: int = UNLABELED


@dataclass
class EdgeStream:
    """Parsed edge records plus the raw-key -> dense id mapping."""

    edges: list[TemporalEdge]
    node_map: dict[str, int]
    self_loops: int = 0

    @property
    def num_nodes(self) -> int:
        return len(self.node_map)

    def node_keys(self) -> list[str]:
        keys = [""] * len(self.node_map)
        for key, idx in self.node_map.items():
            keys[idx] = key
        return keys


def parse_edge_lines(lines: Iterable[str], node_map: dict[str, int] | None = None) -> EdgeStream:
    """Parse ``src dst timestamp [label]`` records.

    Nodes are interned in first-seen order. Passing an existing ``node_map``
    extends it in place, which is how candidate files are resolved against a
    dataset's ids.
    """
    node_map = {} if node_map is None else node_map
    edges: list[TemporalEdge] = []
    self_loops = 0
    seen_record = False
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        seen_record = True
        parts = [p for p in _SEP.split(line) if p]
        if len(parts) not in (3, 4):
            raise EdgeFileError(line_no, f"expected 'src dst timestamp [label]', got {len(parts)} fields")
        try:
            time = int(parts[2])
        except ValueError:
            raise EdgeFileError(line_no, f"timestamp {parts[2]!r} is not an integer") from None
        if time < 0:
            raise EdgeFileError(line_no, "negative timestamp")
        label = UNLABELED
        if len(parts) == 4:
            if parts[3] not in ("0", "1"):
                raise EdgeFileError(line_no, f"label must be 0 or 1, got {parts[3]!r}")
            label = int(parts[3])
        src_key, dst_key = parts[0], parts[1]
        if src_key == dst_key:
            self_loops += 1
            continue
        src = node_map.setdefault(src_key, len(node_map))
        dst = node_map.setdefault(dst_key, len(node_map))
        edges.append(TemporalEdge(src, dst, time, label))
    if not seen_record:
        raise EmptyInputError("edge stream contains no records")
    return EdgeStream(edges, node_map, self_loops)


def ingest_edge_stream(path: str | Path, node_map: dict[str, int] | None = None) -> EdgeStream:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        return parse_edge_lines(fh, node_map)


def format_edges(edges: Sequence[TemporalEdge], node_keys: Sequence[str]) -> str:
    out = []
    for e in edges:
        rec = f"{node_keys[e.src]} {node_keys[e.dst]} {e.time}"
        if e.label != UNLABELED:
            rec += f" {e.label}"
        out.append(rec + "\n")
    return "".join(out)


def export_edges(path: str | Path, edges: Sequence[TemporalEdge], node_keys: Sequence[str]) -> None:
    """Write edges in the canonical single-space, LF-terminated format."""
    Path(path).write_text(format_edges(edges, node_keys), encoding="utf-8", newline="\n")


class Snapshot:
    """Undirected 0/1 adjacency of one time step, stored as CSR arrays."""

    def __init__(self, index: int, num_nodes: int, pairs: np.ndarray):
        self.index = index
        self.num_nodes = num_nodes
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        keys = np.unique(lo * num_nodes + hi)
        self.edges = np.stack([keys // num_nodes, keys % num_nodes], axis=1) if len(keys) else np.zeros((0, 2), np.int64)
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((dst, src))
        self.indices = dst[order]
        self.indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=num_nodes), out=self.indptr[1:])
        self._keys = set(keys.tolist())
        self._lists: list[list[int]] | None = None

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def adjacency_lists(self) -> list[list[int]]:
        """Sorted neighbour lists as plain Python lists (built on first use)."""
        if self._lists is None:
            self._lists = [row.tolist() for row in np.split(self.indices, self.indptr[1:-1])]
        return self._lists

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def has_edge(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return u * self.num_nodes + v in self._keys

    def edge_keys(self) -> set[int]:
        return self._keys

    def gather_neighbors(self, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised neighbour lookup: (position of owner in ``nodes``, neighbour id)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        starts = self.indptr[nodes]
        counts = self.indptr[nodes + 1] - starts
        total = int(counts.sum())
        if total == 0:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        owner = np.repeat(np.arange(len(nodes)), counts)
        offsets = np.cumsum(counts) - counts
        idx = np.arange(total) - np.repeat(offsets, counts) + np.repeat(starts, counts)
        return owner, self.indices[idx]

    def __repr__(self) -> str:
        return f"Snapshot(index={self.index}, nodes={self.num_nodes}, edges={self.num_edges})"


@dataclass
class DynamicGraph:
    num_nodes: int
    snapshots: list[Snapshot]
    mode: str
    # snapshot index of every input edge, in input order
    assignment: np.ndarray = field(repr=False)
    # first / last timestamp of the edges that fall in each period
    time_bounds: list[tuple[int, int]] = field(repr=False)

    @property
    def num_snapshots(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, i: int) -> Snapshot:
        return self.snapshots[i]

    def snapshot_of_time(self, time: int) -> int:
        """Latest snapshot whose period starts at or before ``time``."""
        starts = [lo for lo, _ in self.time_bounds]
        return max(0, min(bisect.bisect_right(starts, time) - 1, self.num_snapshots - 1))

    def has_edge_anywhere(self, u: int, v: int) -> bool:
        return any(s.has_edge(u, v) for s in self.snapshots)

    def all_edge_keys(self) -> set[int]:
        if self.mode == ACCUMULATED:
            return set(self.snapshots[-1].edge_keys())
        keys: set[int] = set()
        for s in self.snapshots:
            keys |= s.edge_keys()
        return keys


def partition_edges(times: np.ndarray, num_snapshots: int, partition: str = EQUAL_COUNT) -> np.ndarray:
    """Snapshot index per edge. ``times`` need not be sorted."""
    times = np.asarray(times, dtype=np.int64)
    n = len(times)
    if num_snapshots < 2:
        raise PartitionError("need at least 2 snapshots")
    if n == 0:
        raise PartitionError("no edges to partition")
    if partition == EQUAL_COUNT:
        if num_snapshots > n:
            raise PartitionError(f"{num_snapshots} snapshots requested but only {n} edges")
        order = np.argsort(times, kind="stable")
        base, extra = divmod(n, num_snapshots)
        sizes = np.full(num_snapshots, base)
        sizes[:extra] += 1
        out = np.empty(n, dtype=np.int64)
        out[order] = np.repeat(np.arange(num_snapshots), sizes)
        return out
    if partition == EQUAL_TIME:
        lo, hi = int(times.min()), int(times.max())
        span = hi - lo
        if span == 0:
            return np.zeros(n, dtype=np.int64)
        return np.minimum((times - lo) * num_snapshots // span, num_snapshots - 1)
    raise PartitionError(f"unknown partition {partition!r}")


def build_snapshots(
    edges: Sequence[TemporalEdge],
    num_snapshots: int,
    partition: str = EQUAL_COUNT,
    mode: str = TIME_EVOLVING,
    num_nodes: int | None = None,
) -> DynamicGraph:
    if mode not in (TIME_EVOLVING, ACCUMULATED):
        raise PartitionError(f"unknown graph mode {mode!r}")
    if not edges:
        raise PartitionError("no edges to partition")
    src = np.array([e.src for e in edges], dtype=np.int64)
    dst = np.array([e.dst for e in edges], dtype=np.int64)
    times = np.array([e.time for e in edges], dtype=np.int64)
    if num_nodes is None:
        num_nodes = int(max(src.max(), dst.max())) + 1
    assignment = partition_edges(times, num_snapshots, partition)

    snapshots = []
    bounds = []
    pairs = np.stack([src, dst], axis=1)
    acc = np.zeros((0, 2), dtype=np.int64)
    for i in range(num_snapshots):
        mask = assignment == i
        block = pairs[mask]
        if mode == ACCUMULATED:
            acc = np.concatenate([acc, block])
            block = acc
        snap = Snapshot(i, num_nodes, block)
        if mode == ACCUMULATED:
            acc = snap.edges  # keep deduplicated to bound memory
        snapshots.append(snap)
        if mask.any():
            bounds.append((int(times[mask].min()), int(times[mask].max())))
        else:
            prev = bounds[-1][1] if bounds else int(times.min())
            bounds.append((prev, prev))
    return DynamicGraph(num_nodes, snapshots, mode, assignment, bounds)


def bfs_distances(
    snapshot: Snapshot,
    source: int,
    max_depth: int,
    excluded_edge: tuple[int, int] | None = None,
) -> dict[int, int]:
    """Unweighted shortest-path distances from ``source`` up to ``max_depth``.

    ``excluded_edge`` is ignored in both directions. Unreached nodes are absent.
    """
    if excluded_edge is not None:
        a, b = excluded_edge
        banned = {(a, b), (b, a)}
    else:
        banned = set()
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u]
        if du >= max_depth:
            continue
        for v in snapshot.neighbors(u).tolist():
            if v in dist or (u, v) in banned:
                continue
            dist[v] = du + 1
            queue.append(v)
    return dist


def summarize(graph: DynamicGraph, stream: EdgeStream | None = None) -> dict:
    edges = stream.edges if stream is not None else []
    times = [e.time for e in edges]
    return {
        "nodes": graph.num_nodes,
        "edges": len(edges),
        "self_loops_dropped": stream.self_loops if stream is not None else 0,
        "time_range": [min(times), max(times)] if times else None,
        "mode": graph.mode,
        "snapshot_edges": [s.num_edges for s in graph.snapshots],
        "snapshot_records": np.bincount(graph.assignment, minlength=graph.num_snapshots).tolist(),
    }
