"""Two-community dynamic graph with a known notion of anomalous edge."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import TemporalEdge


@dataclass
class CommunityGraph:
    edges: list[TemporalEdge]
    community: np.ndarray  # community id per node

    @property
    def num_nodes(self) -> int:
        return len(self.community)

    def cross_community(self, x: int, y: int) -> bool:
        return bool(self.community[x] != self.community[y])


def two_community_stream(
    nodes_per_community: int = 50,
    num_snapshots: int = 20,
    p_in: float = 0.07,
    p_out: float = 0.002,
    seed: int = 0,
) -> CommunityGraph:
    """Stochastic block model resampled at every time step.

    Each step contributes an independent draw of intra-community pairs with
    probability ``p_in`` and cross pairs with ``p_out``; the step index is
    the timestamp. Node ids are ``0..2n-1``, the first ``n`` in community 0.
    """
    rng = np.random.default_rng(seed)
    n = 2 * nodes_per_community
    community = np.repeat([0, 1], nodes_per_community)
    iu, ju = np.triu_indices(n, k=1)
    same = community[iu] == community[ju]
    prob = np.where(same, p_in, p_out)
    edges = []
    for t in range(num_snapshots):
        hit = rng.random(len(iu)) < prob
        for a, b in zip(iu[hit].tolist(), ju[hit].tolist()):
            edges.append(TemporalEdge(a, b, t))
    return CommunityGraph(edges, community)
