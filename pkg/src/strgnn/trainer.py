"""Data split, Adam, the training loop, scoring and the end-to-end experiment."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .autodiff import Parameter, Tape
from .evaluation import EvalReport, build_report, roc_auc
from .graph import DynamicGraph, TemporalEdge
from .gsfe import ConfigError, determine_k
from .model import ModelConfig, StrGNN
from .sampling import InjectionSpec, inject_anomalies, sample_negatives
from .subgraph import CandidateEdge, EnclosingSubgraphWindow, WindowError, extract_window

log = logging.getLogger(__name__)


class NumericError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    h: int = 1
    w: int = 5
    train_ratio: float = 0.5
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    channels: tuple[int, ...] = (32, 32, 32)
    hidden: int = 256
    sortpool_rate: float = 0.6
    negatives_per_positive: float = 1.0
    val_fraction: float = 0.1
    workers: int = 1

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if self.h < 1:
            raise ConfigError("h must be >= 1")
        if self.w < 0:
            raise ConfigError("w must be >= 0")
        if not 0 < self.train_ratio < 1:
            raise ConfigError("train_ratio must be in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if not 0 <= self.val_fraction < 1:
            raise ConfigError("val_fraction must be in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d


# ---------------------------------------------------------------------------
# candidates and split


def candidates_from_edges(edges: Sequence[TemporalEdge], graph: DynamicGraph) -> list[CandidateEdge]:
    """One normal candidate per distinct (pair, snapshot), in time order."""
    times = np.array([e.time for e in edges])
    order = np.argsort(times, kind="stable")
    seen = set()
    out = []
    for i in order.tolist():
        e = edges[i]
        c = CandidateEdge(e.src, e.dst, int(graph.assignment[i]), 0)
        if c.key() in seen:
            continue
        seen.add(c.key())
        out.append(c)
    return out


@dataclass
class Split:
    train: list[CandidateEdge]
    test: list[CandidateEdge]
    dropped: int


def split_dataset(candidates: Sequence[CandidateEdge], train_ratio: float, w: int) -> Split:
    """Time-ordered prefix split; candidates without a full window are dropped."""
    if not 0 < train_ratio < 1:
        raise ConfigError("train_ratio must be in (0, 1)")
    cut = int(math.floor(train_ratio * len(candidates) + 0.5))
    train = [c for c in candidates[:cut] if c.t >= w]
    test = [c for c in candidates[cut:] if c.t >= w]
    dropped = len(candidates) - len(train) - len(test)
    if not train or not test:
        raise ConfigError(
            f"split leaves {len(train)} train / {len(test)} test candidates with a full window of {w + 1}"
        )
    return Split(train, test, dropped)


# ---------------------------------------------------------------------------
# window extraction

_WORKER_STATE: dict = {}


def _init_worker(graph, h, w):
    _WORKER_STATE.update(graph=graph, h=h, w=w)


def _extract_chunk(chunk):
    g, h, w = _WORKER_STATE["graph"], _WORKER_STATE["h"], _WORKER_STATE["w"]
    return [extract_window(g, c, h, w) for c in chunk]


def extract_windows(
    graph: DynamicGraph, candidates: Sequence[CandidateEdge], h: int, w: int, workers: int = 1
) -> list[EnclosingSubgraphWindow]:
    """Windows in candidate order; ``workers > 1`` fans out over processes."""
    if workers <= 1 or len(candidates) < 64:
        return [extract_window(graph, c, h, w) for c in candidates]
    size = max(16, len(candidates) // (workers * 4))
    chunks = [candidates[i : i + size] for i in range(0, len(candidates), size)]
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(graph, h, w)) as pool:
        return [win for part in pool.map(_extract_chunk, chunks) for win in part]


class WindowCache:
    """Memoises windows of candidates that are scored repeatedly."""

    def __init__(self, graph: DynamicGraph, h: int, w: int, workers: int = 1):
        self.graph, self.h, self.w, self.workers = graph, h, w, workers
        self._store: dict[tuple[int, int, int], EnclosingSubgraphWindow] = {}

    def get(self, candidates: Sequence[CandidateEdge]) -> list[EnclosingSubgraphWindow]:
        missing = [c for c in dict.fromkeys(candidates) if c.key() not in self._store]
        for c, win in zip(missing, extract_windows(self.graph, missing, self.h, self.w, self.workers)):
            self._store[c.key()] = win
        return [self._store[c.key()] for c in candidates]


# ---------------------------------------------------------------------------
# optimiser


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[Parameter]) -> "AdamState":
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def adam_step(
    params: Sequence[Parameter],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


# ---------------------------------------------------------------------------
# training


@dataclass
class FitResult:
    model: StrGNN
    log: list[dict]
    best_epoch: int
    best_val_auc: float | None
    train_size: int
    val_size: int


def predict_windows(model: StrGNN, windows: Sequence[EnclosingSubgraphWindow], batch_size: int = 128):
    scores, hidden = [], []
    for i in range(0, len(windows), batch_size):
        pred = model.forward(windows[i : i + batch_size])
        scores.append(pred.scores.data.reshape(-1))
        hidden.append(pred.hidden.data)
    if not scores:
        return np.zeros(0), np.zeros((0, model.config.hidden))
    return np.concatenate(scores), np.concatenate(hidden)


def predict_scores(
    model: StrGNN,
    graph: DynamicGraph,
    candidates: Sequence[CandidateEdge],
    h: int,
    w: int,
    batch_size: int = 128,
    cache: WindowCache | None = None,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Anomaly probabilities and final GRU states for each candidate."""
    for c in candidates:
        if c.t < w:
            raise WindowError(f"candidate {c} has no full window of {w + 1}")
    windows = cache.get(candidates) if cache is not None else extract_windows(graph, candidates, h, w, workers)
    return predict_windows(model, windows, batch_size)


def label_vocab_from(windows: Iterable[EnclosingSubgraphWindow]) -> int:
    return max(2, max(win.max_label() for win in windows) + 1)


def fit(
    graph: DynamicGraph,
    train: Sequence[CandidateEdge],
    config: TrainConfig,
    on_epoch: Callable[[dict], None] | None = None,
) -> FitResult:
    """Train on normal ``train`` candidates against freshly sampled negatives.

    The last ``val_fraction`` of ``train`` is held out; the parameters of the
    epoch with the best validation AUC are kept.
    """
    n_val = int(math.ceil(config.val_fraction * len(train))) if config.val_fraction > 0 else 0
    if n_val >= len(train):
        raise ConfigError("validation split would consume the whole training set")
    fit_pos = list(train[: len(train) - n_val])
    val_pos = list(train[len(train) - n_val :])
    cache = WindowCache(graph, config.h, config.w, config.workers)
    pos_windows = cache.get(fit_pos)

    sizes = [g.num_nodes for win in pos_windows for g in win.subgraphs]
    k = determine_k(sizes, config.sortpool_rate)
    vocab = label_vocab_from(pos_windows)
    model = StrGNN(ModelConfig(vocab, k, config.channels, config.hidden), seed=config.seed)
    params = model.parameters()
    state = AdamState.zeros_like(params)
    log.info("fit: %d train / %d val positives, label vocab %d, k=%d", len(fit_pos), n_val, vocab, k)

    val_windows, val_labels = [], None
    if n_val:
        val_neg = sample_negatives(graph, val_pos, np.random.default_rng([config.seed, 0]), config.negatives_per_positive)
        val_windows = cache.get(val_pos) + extract_windows(graph, val_neg, config.h, config.w, config.workers)
        val_labels = np.r_[np.zeros(len(val_pos)), np.ones(len(val_neg))]

    records = []
    best = (-math.inf, -1, None)
    for epoch in range(config.epochs):
        started = time.perf_counter()
        rng = np.random.default_rng([config.seed, epoch + 1])
        negs = sample_negatives(graph, fit_pos, rng, config.negatives_per_positive)
        windows = pos_windows + extract_windows(graph, negs, config.h, config.w, config.workers)
        labels = np.r_[np.zeros(len(fit_pos)), np.ones(len(negs))]
        order = rng.permutation(len(windows))
        total = 0.0
        for i in range(0, len(order), config.batch_size):
            idx = order[i : i + config.batch_size]
            model.zero_grad()
            with Tape() as tape:
                loss, _ = model.loss([windows[j] for j in idx], labels[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"non-finite loss {value} at epoch {epoch}, batch {i // config.batch_size}")
            tape.backward(loss)
            adam_step(params, [p.grad for p in params], state, config.lr, config.beta1, config.beta2, config.adam_eps)
            total += value * len(idx)
        record = {"epoch": epoch, "mean_loss": total / len(order), "val_auc": None}
        if n_val:
            scores, _ = predict_windows(model, val_windows)
            record["val_auc"] = roc_auc(scores, val_labels)
            if record["val_auc"] > best[0]:
                best = (record["val_auc"], epoch, model.state_dict())
        record["wall_ms"] = int((time.perf_counter() - started) * 1000)
        records.append(record)
        log.info("epoch %d loss %.4f val_auc %s", epoch, record["mean_loss"], record["val_auc"])
        if on_epoch is not None:
            on_epoch(record)

    if best[2] is not None:
        model.load_state_dict(best[2])
        return FitResult(model, records, best[1], best[0], len(fit_pos), n_val)
    return FitResult(model, records, config.epochs - 1, None, len(fit_pos), n_val)


def write_log(path: str | Path, records: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentResult:
    auc: float
    report: EvalReport
    fit: FitResult
    split: Split
    test_candidates: list[CandidateEdge] = field(repr=False)


def run_experiment(
    graph: DynamicGraph,
    candidates: Sequence[CandidateEdge],
    config: TrainConfig,
    fraction: float,
    injection_seed: int | None = None,
    accept: Callable[[int, int], bool] | None = None,
) -> ExperimentResult:
    """Split, train, inject anomalies into the test part, score and report."""
    split = split_dataset(candidates, config.train_ratio, config.w)
    result = fit(graph, split.train, config)
    rng = np.random.default_rng(config.seed if injection_seed is None else injection_seed)
    test = inject_anomalies(graph, split.test, InjectionSpec(fraction), rng, accept=accept)
    scores, hidden = predict_scores(result.model, graph, test, config.h, config.w, workers=config.workers)
    labels = np.array([c.y_label for c in test])
    report = build_report(
        scores, labels, hidden, [(c.x, c.y, c.t) for c in test], {"train": config.to_dict(), "fraction": fraction}
    )
    return ExperimentResult(report.auc, report, result, split, test)


def rolling_folds(n: int, folds: int = 5) -> list[tuple[slice, slice]]:
    """Expanding-window folds over a time-ordered sequence of length ``n``."""
    if folds < 1 or n < folds + 1:
        raise ConfigError(f"cannot make {folds} rolling folds from {n} items")
    step = n // (folds + 1)
    return [(slice(0, step * i), slice(step * i, step * (i + 1) if i < folds else n)) for i in range(1, folds + 1)]


def cross_validate(
    graph: DynamicGraph, train: Sequence[CandidateEdge], config: TrainConfig, folds: int = 5
) -> list[float]:
    """Validation AUC per rolling fold (train on the prefix, score the next block)."""
    aucs = []
    for fit_part, val_part in rolling_folds(len(train), folds):
        cfg = TrainConfig(**{**config.to_dict(), "val_fraction": 0.0})
        result = fit(graph, train[fit_part], cfg)
        val_pos = list(train[val_part])
        neg = sample_negatives(graph, val_pos, np.random.default_rng([config.seed, 1000 + len(aucs)]))
        scores, _ = predict_scores(result.model, graph, val_pos + neg, config.h, config.w, workers=config.workers)
        aucs.append(roc_auc(scores, np.r_[np.zeros(len(val_pos)), np.ones(len(neg))]))
    return aucs
