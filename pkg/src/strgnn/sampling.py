"""Context-dependent negative sampling and benchmark anomaly injection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .graph import DynamicGraph
from .subgraph import CandidateEdge


class SamplingError(RuntimeError):
    pass


class InjectionError(RuntimeError):
    pass


@dataclass
class SamplingConfig:
    rng_seed: int = 0
    negatives_per_positive: float = 1.0
    max_retries: int = 100

    def __post_init__(self):
        if self.negatives_per_positive <= 0:
            raise ValueError("negatives_per_positive must be positive")


def sample_negative(graph: DynamicGraph, t: int, rng: np.random.Generator, max_retries: int = 100) -> CandidateEdge:
    """Corrupt one endpoint of a random edge of snapshot ``t``.

    The corrupted pair is kept only if it is not an edge of that snapshot.
    """
    snap = graph[t]
    if snap.num_edges == 0:
        raise SamplingError(f"snapshot {t} has no edges to corrupt")
    for _ in range(max_retries):
        a, b = snap.edges[rng.integers(snap.num_edges)]
        replace_first = rng.random() < 0.5
        node = int(rng.integers(graph.num_nodes))
        x, y = (node, int(b)) if replace_first else (int(a), node)
        if x != y and not snap.has_edge(x, y):
            return CandidateEdge(x, y, t, 1)
    raise SamplingError(f"no non-edge found in snapshot {t} after {max_retries} tries")


def sample_negatives(
    graph: DynamicGraph,
    positives: Sequence[CandidateEdge],
    rng: np.random.Generator,
    ratio: float = 1.0,
    max_retries: int = 100,
) -> list[CandidateEdge]:
    """Negatives drawn at the snapshots of ``positives`` (cycled if ``ratio`` > 1)."""
    count = int(math.floor(ratio * len(positives) + 0.5))
    return [
        sample_negative(graph, positives[i % len(positives)].t, rng, max_retries) for i in range(count)
    ]


@dataclass
class InjectionSpec:
    fraction: float
    # "all": pair absent from every snapshot; "snapshot": absent from its own snapshot only
    scope: str = "all"

    def __post_init__(self):
        if not 0 <= self.fraction < 1:
            raise ValueError(f"injection fraction must be in [0, 1), got {self.fraction}")
        if self.scope not in ("all", "snapshot"):
            raise ValueError(f"unknown injection scope {self.scope!r}")


def injection_count(fraction: float, positives: int) -> int:
    return int(math.floor(fraction * positives + 0.5))


def inject_anomalies(
    graph: DynamicGraph,
    test_candidates: Sequence[CandidateEdge],
    spec: InjectionSpec,
    rng: np.random.Generator,
    accept: Callable[[int, int], bool] | None = None,
    max_retries: int = 100,
) -> list[CandidateEdge]:
    """Originals relabelled normal, followed by injected anomalous pairs.

    Injected pairs are uniform random node pairs that never occur in the data
    (or only not in their own snapshot, depending on ``spec.scope``), placed
    at a uniform snapshot of the test period. ``accept`` can restrict the
    pairs further, e.g. to cross-community pairs.
    """
    if not test_candidates:
        raise InjectionError("no test candidates to inject into")
    originals = [CandidateEdge(c.x, c.y, c.t, 0) for c in test_candidates]
    m = injection_count(spec.fraction, len(originals))
    if m == 0:
        return originals
    first = min(c.t for c in test_candidates)
    periods = np.arange(first, graph.num_snapshots)
    n = graph.num_nodes
    forbidden = graph.all_edge_keys() if spec.scope == "all" else set()
    chosen: set[int] = set()
    injected = []
    budget = max_retries * m
    while len(injected) < m:
        if budget == 0:
            raise InjectionError(f"could only inject {len(injected)} of {m} anomalous pairs")
        budget -= 1
        x, y = (int(v) for v in rng.integers(n, size=2))
        if x == y:
            continue
        key = min(x, y) * n + max(x, y)
        if key in forbidden or key in chosen:
            continue
        if accept is not None and not accept(x, y):
            continue
        t = int(periods[rng.integers(len(periods))])
        if spec.scope == "snapshot" and graph[t].has_edge(x, y):
            continue
        chosen.add(key)
        injected.append(CandidateEdge(x, y, t, 1))
    return originals + injected
