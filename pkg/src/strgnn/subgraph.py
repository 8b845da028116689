"""Enclosing subgraph extraction and distance-based node labelling.

For a target pair ``(x, y)`` and hop count ``h`` the enclosing subgraph of a
snapshot is the induced graph over every node within ``h`` hops of either
endpoint. Each node is tagged with an integer role computed from its
distances to the two centres; the tags are one-hot encoded as GCN input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import DynamicGraph, Snapshot


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateEdge:
    x: int
    y: int
    t: int
    y_label: int = 0

    def key(self) -> tuple[int, int, int]:
        a, b = (self.x, self.y) if self.x < self.y else (self.y, self.x)
        return a, b, self.t


@dataclass
class LabeledSubgraph:
    """Induced subgraph in local indices.

    ``nodes[i]`` is the global id of local node ``i``; ``edges`` holds
    undirected local pairs with ``i < j``. The two centres sit at local
    indices ``center_local``.
    """

    nodes: np.ndarray
    edges: np.ndarray
    labels: np.ndarray
    center_local: tuple[int, int]

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def dense_adjacency(self) -> np.ndarray:
        n = self.num_nodes
        a = np.zeros((n, n))
        if len(self.edges):
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def permuted(self, perm: Sequence[int]) -> "LabeledSubgraph":
        """Relabel local indices: new local ``i`` is old local ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        edges = inv[self.edges] if len(self.edges) else self.edges.copy()
        if len(edges):
            edges = np.sort(edges, axis=1)
            edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
        cx, cy = self.center_local
        return LabeledSubgraph(self.nodes[perm], edges, self.labels[perm], (int(inv[cx]), int(inv[cy])))

    def canonical(self) -> "LabeledSubgraph":
        """Same subgraph with local order = ascending global id."""
        order = np.argsort(self.nodes, kind="stable")
        if np.array_equal(order, np.arange(len(order))):
            return self
        return self.permuted(order)

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes.tolist(),
            "edges": self.edges.tolist(),
            "labels": self.labels.tolist(),
            "centers": list(self.center_local),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledSubgraph":
        edges = np.asarray(d["edges"], dtype=np.int64).reshape(-1, 2)
        return cls(
            np.asarray(d["nodes"], dtype=np.int64),
            edges,
            np.asarray(d["labels"], dtype=np.int64),
            (int(d["centers"][0]), int(d["centers"][1])),
        )


@dataclass
class EnclosingSubgraphWindow:
    subgraphs: list[LabeledSubgraph]  # oldest first
    candidate: CandidateEdge

    def max_label(self) -> int:
        return max(int(g.labels.max()) for g in self.subgraphs)

    def to_json(self) -> str:
        c = self.candidate
        return json.dumps(
            {
                "candidate": {"x": c.x, "y": c.y, "t": c.t, "y_label": c.y_label},
                "subgraphs": [g.to_dict() for g in self.subgraphs],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "EnclosingSubgraphWindow":
        d = json.loads(text)
        c = d["candidate"]
        return cls(
            [LabeledSubgraph.from_dict(g) for g in d["subgraphs"]],
            CandidateEdge(c["x"], c["y"], c["t"], c["y_label"]),
        )


def _ball(adj: list[list[int]], x: int, y: int, h: int) -> set[int]:
    seen = {x, y}
    frontier = list(seen)
    for _ in range(h):
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        if not nxt:
            break
        frontier = nxt
    return seen


def extract_enclosing_subgraph(snapshot: Snapshot, x: int, y: int, h: int) -> np.ndarray:
    """Sorted global ids within ``h`` hops of ``x`` or ``y`` (both always included)."""
    if h < 1:
        raise ValueError("hop count must be >= 1")
    return np.array(sorted(_ball(snapshot.adjacency_lists(), x, y, h)), dtype=np.int64)


def induced_edges(snapshot: Snapshot, nodes: Sequence[int]) -> np.ndarray:
    """Local ``(i, j)``, ``i < j``, pairs of the snapshot edges inside ``nodes``."""
    adj = snapshot.adjacency_lists()
    nodes = [int(v) for v in nodes]
    local = {v: i for i, v in enumerate(nodes)}
    pairs = []
    for i, u in enumerate(nodes):
        for v in adj[u]:
            j = local.get(v)
            if j is not None and i < j:
                pairs.append((i, j))
    pairs.sort()
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def label_from_distances(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Role label from the distances to both centres (``inf`` for unreachable)."""
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    unreachable = ~(np.isfinite(dx) & np.isfinite(dy))
    dxi = np.where(unreachable, 0, dx).astype(np.int64)
    dyi = np.where(unreachable, 0, dy).astype(np.int64)
    d_sum = dxi + dyi
    half = d_sum // 2
    labels = 1 + np.minimum(dxi, dyi) + half * (half + d_sum % 2 - 1)
    labels[(dxi == 0) | (dyi == 0)] = 1
    labels[unreachable] = 0
    return labels


def _local_distances(adj: list[list[int]], source: int) -> np.ndarray:
    dist = np.full(len(adj), np.inf)
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if dist[v] == np.inf:
                    dist[v] = d
                    nxt.append(v)
        frontier = nxt
    return dist


def label_nodes(num_nodes: int, edges: np.ndarray, x: int, y: int) -> np.ndarray:
    """Labels for every local node; distances ignore any direct ``x``-``y`` edge."""
    adj: list[list[int]] = [[] for _ in range(num_nodes)]
    for a, b in np.asarray(edges, dtype=np.int64).reshape(-1, 2).tolist():
        if (a == x and b == y) or (a == y and b == x):
            continue
        adj[a].append(b)
        adj[b].append(a)
    return label_from_distances(_local_distances(adj, x), _local_distances(adj, y))


def encode_features(labels: np.ndarray, label_vocab_size: int) -> np.ndarray:
    """One-hot rows, labels above ``label_vocab_size - 1`` clamped into the last column."""
    if label_vocab_size < 2:
        raise ValueError("label vocabulary needs at least 2 entries")
    labels = np.minimum(np.asarray(labels, dtype=np.int64), label_vocab_size - 1)
    out = np.zeros((len(labels), label_vocab_size))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def labeled_subgraph(snapshot: Snapshot, x: int, y: int, h: int, drop_target: bool = False) -> LabeledSubgraph:
    """Enclosing subgraph of ``(x, y)`` with role labels; local order is ascending global id.

    ``drop_target`` removes a direct ``x``-``y`` edge from the returned
    adjacency as well (it is always ignored for the distances).
    """
    nodes = extract_enclosing_subgraph(snapshot, x, y, h)
    edges = induced_edges(snapshot, nodes)
    cx = int(np.searchsorted(nodes, x))
    cy = int(np.searchsorted(nodes, y))
    if drop_target and len(edges):
        lo, hi = min(cx, cy), max(cx, cy)
        edges = edges[~((edges[:, 0] == lo) & (edges[:, 1] == hi))]
    labels = label_nodes(len(nodes), edges, cx, cy)
    return LabeledSubgraph(nodes, edges, labels, (cx, cy))


def extract_window(graph: DynamicGraph, candidate: CandidateEdge, h: int, w: int) -> EnclosingSubgraphWindow:
    """Labelled subgraphs around the candidate in snapshots ``t-w .. t``.

    The current snapshot is viewed without the candidate pair, so a normal
    edge cannot reveal itself through its own adjacency entry. Earlier
    snapshots keep any past occurrence of the pair.
    """
    t = candidate.t
    if t < w:
        raise WindowError(f"candidate at snapshot {t} has no full window of {w + 1}")
    if t >= graph.num_snapshots:
        raise WindowError(f"candidate snapshot {t} out of range")
    if candidate.x == candidate.y:
        raise WindowError("candidate is a self-loop")
    subgraphs = [
        labeled_subgraph(graph[i], candidate.x, candidate.y, h, drop_target=(i == t))
        for i in range(t - w, t + 1)
    ]
    return EnclosingSubgraphWindow(subgraphs, candidate)
