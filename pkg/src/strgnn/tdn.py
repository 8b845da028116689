"""GRU over per-snapshot features, linear+sigmoid head and cross-entropy loss.

Row-vector convention: inputs are ``batch x features`` and every product is
``x @ W``. The update gate keeps the previous state::

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    c = tanh(x Wh + (r * h) Uh + bh)
    h' = z * h + (1 - z) * c
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .gsfe import glorot

BCE_EPS = 1e-7


class GruCell:
    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        for gate in ("z", "r", "h"):
            setattr(self, f"W_{gate}", Parameter(glorot(rng, input_dim, hidden_dim), name=f"gru.W_{gate}"))
            setattr(self, f"U_{gate}", Parameter(glorot(rng, hidden_dim, hidden_dim), name=f"gru.U_{gate}"))
            setattr(self, f"b_{gate}", Parameter(np.zeros(hidden_dim), name=f"gru.b_{gate}"))

    def parameters(self) -> list[Parameter]:
        return [getattr(self, f"{p}_{g}") for g in ("z", "r", "h") for p in ("W", "U", "b")]


class ClassifierHead:
    def __init__(self, hidden_dim: int, rng: np.random.Generator):
        self.w = Parameter(glorot(rng, hidden_dim, 1), name="head.w")
        self.b = Parameter(np.zeros(1), name="head.b")

    def parameters(self) -> list[Parameter]:
        return [self.w, self.b]


def gru_step(x: Tensor, h_prev: Tensor, cell: GruCell) -> Tensor:
    if x.data.ndim != 2 or x.shape[1] != cell.input_dim:
        raise ad.ShapeError(f"gru input {x.shape} does not match input dim {cell.input_dim}")
    if h_prev.shape != (x.shape[0], cell.hidden_dim):
        raise ad.ShapeError(f"gru state {h_prev.shape} does not match ({x.shape[0]}, {cell.hidden_dim})")
    z = ad.sigmoid(x @ cell.W_z + h_prev @ cell.U_z + cell.b_z)
    r = ad.sigmoid(x @ cell.W_r + h_prev @ cell.U_r + cell.b_r)
    cand = ad.tanh(x @ cell.W_h + ad.mul(r, h_prev) @ cell.U_h + cell.b_h)
    return ad.mul(z, h_prev) + ad.mul(1.0 - z, cand)


def gru_sequence(features: Sequence[Tensor], cell: GruCell) -> Tensor:
    """Fold ``gru_step`` oldest to newest from a zero state; return the last state."""
    if len(features) == 0:
        raise ValueError("gru_sequence needs at least one time step")
    h = Tensor(np.zeros((features[0].shape[0], cell.hidden_dim)))
    for x in features:
        h = gru_step(x, h, cell)
    return h


def classify(h: Tensor, head: ClassifierHead) -> Tensor:
    """Anomaly probability per row of ``h`` (``batch x 1``)."""
    return ad.sigmoid(h @ head.w + head.b)


def bce_loss(scores: Tensor, labels, eps: float = BCE_EPS) -> Tensor:
    return ad.bce(scores, np.asarray(labels, dtype=np.float64), eps)
