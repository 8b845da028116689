import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from strgnn.graph import Snapshot, TemporalEdge, build_snapshots


def make_snapshot(n, edges, index=0):
    return Snapshot(index, n, np.array(edges, dtype=np.int64).reshape(-1, 2))


@pytest.fixture
def path4():
    return make_snapshot(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def triangle():
    return make_snapshot(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def small_dynamic_graph():
    """8 nodes, 10 snapshots of a slowly changing ring with chords."""
    rng = np.random.default_rng(3)
    edges = []
    for t in range(10):
        for i in range(8):
            if rng.random() < 0.7:
                edges.append(TemporalEdge(i, (i + 1) % 8, t))
        a, b = rng.choice(8, size=2, replace=False)
        edges.append(TemporalEdge(int(a), int(b), t))
    return build_snapshots(edges, 10, mode="time-evolving", num_nodes=8), edges


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
