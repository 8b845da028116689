"""Enclosing subgraphs and double-radius labels on a toy dynamic graph.

Run with ``python demos/01_subgraph_labeling.py``.
"""

# %%
from strgnn import CandidateEdge, TemporalEdge, build_snapshots, extract_window

# Three snapshots of a small social graph. Nodes 0 and 1 get connected in the
# last one; that is the candidate edge we look at.
records = [
    (0, 2, 0), (2, 3, 0), (3, 1, 0),
    (0, 2, 1), (2, 1, 1), (4, 5, 1),
    (0, 1, 2), (0, 2, 2), (2, 1, 2), (1, 4, 2), (4, 5, 2),
]
edges = [TemporalEdge(a, b, t) for a, b, t in records]
graph = build_snapshots(edges, num_snapshots=3, partition="equal-time", num_nodes=6)

for snap in graph.snapshots:
    print(f"snapshot {snap.index}: {snap.edges.tolist()}")

# %%
# One window = the 1-hop enclosing subgraph around (0, 1) in each of the
# w+1 snapshots ending at t. The target edge itself is hidden from the
# current snapshot, so the model cannot simply look it up.
window = extract_window(graph, CandidateEdge(0, 1, 2), h=1, w=2)

for t, sub in enumerate(window.subgraphs):
    print(f"\nt={t}  nodes={sub.nodes.tolist()}")
    print(f"      edges={[[int(sub.nodes[i]), int(sub.nodes[j])] for i, j in sub.edges]}")
    print(f"      labels={sub.labels.tolist()}")

# %%
# Reading the labels: the centres get 1, a node one hop from both centres
# gets 2, distances (1, 2) give 3, and so on. At t=0 the path 0-2-3-1 gives
# nodes 2 and 3 label 3. At t=2 node 4 hangs off node 1 and is three steps
# from node 0 once the hidden 0-1 edge is ignored, so it gets label 4.
# Anything that cannot reach both centres is 0, as is the whole subgraph
# when the centres are disconnected from each other.
