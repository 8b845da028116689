"""The full detector: subgraph windows -> GSFE per snapshot -> GRU -> score."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .gsfe import FeatureExtractor
from .subgraph import EnclosingSubgraphWindow
from .tdn import ClassifierHead, GruCell, bce_loss, classify, gru_sequence


class CheckpointMismatch(ValueError):
    pass


@dataclass
class ModelConfig:
    label_vocab: int
    k: int
    channels: tuple[int, ...] = (32, 32, 32)
    hidden: int = 256

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(int(d["label_vocab"]), int(d["k"]), tuple(int(c) for c in d["channels"]), int(d["hidden"]))


@dataclass
class Prediction:
    scores: Tensor  # batch x 1
    hidden: Tensor  # batch x hidden


class StrGNN:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.gsfe = FeatureExtractor(config.label_vocab, config.channels, config.k, rng)
        self.gru = GruCell(self.gsfe.output_dim, config.hidden, rng)
        self.head = ClassifierHead(config.hidden, rng)

    def parameters(self) -> list[Parameter]:
        return self.gsfe.parameters() + self.gru.parameters() + self.head.parameters()

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def forward(self, windows: Sequence[EnclosingSubgraphWindow]) -> Prediction:
        steps = {len(w.subgraphs) for w in windows}
        if len(steps) != 1:
            raise ad.ShapeError(f"windows of mixed length {sorted(steps)} in one batch")
        (n_steps,) = steps
        batch = len(windows)
        # time-major: row s*batch + b is snapshot s of window b
        graphs = [w.subgraphs[s] for s in range(n_steps) for w in windows]
        feats = self.gsfe(graphs)
        seq = [ad.gather_rows(feats, np.arange(s * batch, (s + 1) * batch)) for s in range(n_steps)]
        hidden = gru_sequence(seq, self.gru)
        return Prediction(classify(hidden, self.head), hidden)

    def loss(self, windows: Sequence[EnclosingSubgraphWindow], labels) -> tuple[Tensor, Prediction]:
        pred = self.forward(windows)
        return bce_loss(pred.scores, labels), pred

    # -- persistence -------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        if set(state) != set(params):
            raise CheckpointMismatch(f"parameter names differ: {sorted(set(state) ^ set(params))}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise CheckpointMismatch(f"{name}: shape {state[name].shape} != {p.shape}")
            p.data[...] = state[name]

    def save(self, path: str | Path, run_config: dict | None = None) -> None:
        meta = {"model": self.config.to_dict(), "run": run_config or {}}
        meta["config_hash"] = config_hash(meta["model"], meta["run"])
        ad.save_tensors(path, self.state_dict(), meta)

    @classmethod
    def load(cls, path: str | Path) -> tuple["StrGNN", dict]:
        state, meta = ad.load_tensors(path)
        expected = config_hash(meta.get("model", {}), meta.get("run", {}))
        if meta.get("config_hash") != expected:
            raise CheckpointMismatch(f"{path}: config hash does not match its header")
        model = cls(ModelConfig.from_dict(meta["model"]))
        model.load_state_dict(state)
        return model, meta


def config_hash(*parts: dict) -> str:
    blob = json.dumps(list(parts), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]
