"""Dense float64 tensors with a recording tape for reverse-mode gradients.

Operations record themselves on the innermost active :class:`Tape`; outside
any tape they only compute values. Gradients reach :class:`Parameter`
objects through :meth:`Tape.backward`, which accumulates into ``.grad``.

Only the algebra the model needs is provided. Broadcasting is limited to
adding a bias vector to every row; everything else must match exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        if np.isscalar(other):
            return rsub_scalar(float(other), self)
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    __slots__ = ("grad",)

    def __init__(self, data, name: str = ""):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class Node:
    kind: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    forward: Callable[..., np.ndarray]
    meta: dict = field(default_factory=dict)


_TAPES: list["Tape"] = []


class Tape:
    """Ordered record of operations; creation order is a topological order."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    @staticmethod
    def active() -> "Tape | None":
        return _TAPES[-1] if _TAPES else None

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                if isinstance(inp, Parameter):
                    inp.grad += gi
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi

    def replay(self) -> float:
        """Recompute every node from its saved inputs; max abs deviation from the record."""
        worst = 0.0
        for node in self.nodes:
            out = node.forward(*(t.data for t in node.inputs))
            worst = max(worst, float(np.max(np.abs(out - node.output.data), initial=0.0)))
        return worst

    def ops(self, kind: str) -> list[Node]:
        return [n for n in self.nodes if n.kind == kind]


def _record(kind, inputs, forward, backward, **meta) -> Tensor:
    out = Tensor(forward(*(t.data for t in inputs)))
    tape = Tape.active()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.nodes.append(Node(kind, tuple(inputs), out, backward, forward, meta))
    return out


# ---------------------------------------------------------------------------
# elementwise / linear algebra


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} do not conform")
    return _record("matmul", (a, b), np.matmul, lambda g: (g @ b.data.T, a.data.T @ g))


def _bias_compatible(a: Tensor, b: Tensor) -> bool:
    return a.data.ndim == 2 and (b.shape == (a.shape[1],) or b.shape == (1, a.shape[1]))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        return _record("add", (a, b), np.add, lambda g: (g, g))
    if _bias_compatible(a, b):
        bshape = b.shape
        return _record("add", (a, b), np.add, lambda g: (g, g.sum(axis=0).reshape(bshape)))
    raise ShapeError(f"add shapes {a.shape} and {b.shape} do not conform")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"sub shapes {a.shape} and {b.shape} do not conform")
    return _record("sub", (a, b), np.subtract, lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul shapes {a.shape} and {b.shape} do not conform")
    return _record("mul", (a, b), np.multiply, lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, c: float) -> Tensor:
    return _record("scale", (a,), lambda x: x * c, lambda g: (g * c,))


def rsub_scalar(c: float, a: Tensor) -> Tensor:
    """``c - a``."""
    return _record("rsub", (a,), lambda x: c - x, lambda g: (-g,))


def relu(x: Tensor) -> Tensor:
    return _record("relu", (x,), lambda v: np.maximum(v, 0.0), lambda g: (g * (x.data > 0),))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    holder = {}

    def fwd(v):
        holder["s"] = s = _sigmoid(v)
        return s

    def bwd(g):
        s = holder["s"]
        return (g * s * (1.0 - s),)

    return _record("sigmoid", (x,), fwd, bwd)


def tanh(x: Tensor) -> Tensor:
    holder = {}

    def fwd(v):
        holder["t"] = t = np.tanh(v)
        return t

    return _record("tanh", (x,), fwd, lambda g: (g * (1.0 - holder["t"] ** 2),))


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh}[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(x)


# ---------------------------------------------------------------------------
# structural ops


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of nothing")
    ref = list(tensors[0].shape)
    for t in tensors[1:]:
        other = list(t.shape)
        if len(other) != len(ref) or any(a != b for i, (a, b) in enumerate(zip(ref, other)) if i != axis):
            raise ShapeError(f"concat shapes {tensors[0].shape} and {t.shape} differ off axis {axis}")
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _record(
        "concat",
        tuple(tensors),
        lambda *arrs: np.concatenate(arrs, axis=axis),
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def gather_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """Rows of ``x`` picked by ``index``; entries of -1 yield zero rows."""
    index = np.asarray(index, dtype=np.int64)
    if x.data.ndim != 2:
        raise ShapeError(f"gather_rows needs a matrix, got {x.shape}")
    valid = index >= 0
    src = index[valid]
    n = x.shape[0]
    if len(src) and src.max() >= n:
        raise ShapeError(f"row index {src.max()} out of range for {x.shape}")

    def fwd(v):
        out = np.zeros((len(index), v.shape[1]))
        out[valid] = v[src]
        return out

    def bwd(g):
        gx = np.zeros((n, g.shape[1]))
        np.add.at(gx, src, g[valid])
        return (gx,)

    return _record("gather_rows", (x,), fwd, bwd)


def scale_rows(x: Tensor, s: Tensor) -> Tensor:
    """Multiply row ``i`` of ``x`` by scalar ``s[i]`` (``s`` is n x 1)."""
    if x.data.ndim != 2 or s.shape != (x.shape[0], 1):
        raise ShapeError(f"scale_rows shapes {x.shape} and {s.shape} do not conform")
    return _record(
        "scale_rows",
        (x, s),
        lambda a, b: a * b,
        lambda g: (g * s.data, np.sum(g * x.data, axis=1, keepdims=True)),
    )


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = x.shape
    if int(np.prod(shape)) != x.data.size:
        raise ShapeError(f"cannot reshape {old} to {shape}")
    return _record("reshape", (x,), lambda v: v.reshape(shape), lambda g: (g.reshape(old),))


def propagate(a, x: Tensor) -> Tensor:
    """Left-multiply ``x`` by a constant (dense or scipy sparse) matrix ``a``."""
    if a.shape[1] != x.shape[0]:
        raise ShapeError(f"propagate shapes {a.shape} and {x.shape} do not conform")
    at = a.T.tocsr() if sp.issparse(a) else a.T
    return _record("propagate", (x,), lambda v: np.asarray(a @ v), lambda g: (np.asarray(at @ g),))


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _record("sum", (x,), lambda v: np.array(v.sum()), lambda g: (np.full(shape, float(g)),))


def mean_all(x: Tensor) -> Tensor:
    shape, n = x.shape, x.data.size
    return _record("mean", (x,), lambda v: np.array(v.mean()), lambda g: (np.full(shape, float(g) / n),))


def bce(p: Tensor, y: np.ndarray, eps: float = 1e-7) -> Tensor:
    """Mean binary cross-entropy of probabilities ``p`` against 0/1 targets ``y``.

    ``p`` is clamped to ``[eps, 1 - eps]``; the gradient is zero where the
    clamp is active.
    """
    y = np.asarray(y, dtype=np.float64).reshape(p.shape)
    n = p.data.size

    def fwd(v):
        c = np.clip(v, eps, 1.0 - eps)
        return np.array(-np.mean(y * np.log(c) + (1.0 - y) * np.log(1.0 - c)))

    def bwd(g):
        v = p.data
        c = np.clip(v, eps, 1.0 - eps)
        inside = (v > eps) & (v < 1.0 - eps)
        return (float(g) * inside * (-(y / c) + (1.0 - y) / (1.0 - c)) / n,)

    return _record("bce", (p,), fwd, bwd)


# ---------------------------------------------------------------------------
# verification


def finite_difference_check(
    f: Callable[[], Tensor],
    param: Parameter,
    eps: float = 1e-5,
    coords: Iterable[int] | None = None,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` rebuilds the scalar loss from scratch on each call. ``coords``
    restricts the check to flat indices of ``param``, e.g. to skip points
    where the function is not differentiable.
    """
    param.zero_grad()
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    analytic = param.grad.copy()
    flat = param.data.reshape(-1)
    idx = range(flat.size) if coords is None else coords
    worst = 0.0
    for i in idx:
        orig = flat[i]
        flat[i] = orig + eps
        up = f().item()
        flat[i] = orig - eps
        down = f().item()
        flat[i] = orig
        numeric = (up - down) / (2 * eps)
        a = analytic.reshape(-1)[i]
        denom = max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, abs(a - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# checkpoints: [u64 LE header length][JSON header][little-endian float64 payload]


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    payload = []
    offset = 0
    for name, arr in tensors.items():
        buf = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(np.shape(arr)), "offset": offset})
        payload.append(buf)
        offset += len(buf)
    header = json.dumps({"tensors": entries, "meta": meta or {}}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for buf in payload:
            fh.write(buf)


def load_tensors(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated checkpoint")
    (hlen,) = struct.unpack("<Q", raw[:8])
    header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    base = 8 + hlen
    out = {}
    for e in header["tensors"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        start = base + e["offset"]
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=start)
        out[e["name"]] = arr.astype(np.float64).reshape(e["shape"])
    return out, header.get("meta", {})
