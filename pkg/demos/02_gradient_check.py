"""Checking the hand-written backward pass against finite differences.

Every layer of the model (GCN, SortPooling, GRU, head, BCE) is built on the
small tape in ``strgnn.autodiff``. This script compares its gradients with
central differences on a reduced-size model.
"""

# %%
import numpy as np

from strgnn import CandidateEdge, ModelConfig, StrGNN, TemporalEdge, build_snapshots, extract_window
from strgnn.autodiff import finite_difference_check

rng = np.random.default_rng(0)
n = 10
edges = [
    TemporalEdge(int(a), int(b), t)
    for t in range(3)
    for a, b in (rng.choice(n, 2, replace=False) for _ in range(14))
]
graph = build_snapshots(edges, 3, partition="equal-time", num_nodes=n)
window = extract_window(graph, CandidateEdge(0, 1, 2), h=1, w=2)

# %%
# Small widths keep the check quick; the code path is the same as the
# full 3x32 GCN + 256-unit GRU.
model = StrGNN(ModelConfig(label_vocab=max(2, window.max_label() + 1), k=4, channels=(4, 4, 4), hidden=8), seed=0)


def loss():
    return model.loss([window], [1])[0]


print(f"loss at init: {loss().item():.6f}  (ln 2 = {np.log(2):.6f})")

# %%
for name, param in model.named_parameters().items():
    coords = rng.choice(param.data.size, size=min(5, param.data.size), replace=False).tolist()
    err = finite_difference_check(loss, param, eps=1e-5, coords=coords)
    print(f"{name:12s} shape={str(param.shape):10s} max rel err {err:.2e}")

# Errors of order 1e-6 or below are expected. A coordinate whose gradient is
# exactly zero (e.g. a unit that never fires) can show a larger relative error
# purely from rounding, which is why the acceptance check skips those.
