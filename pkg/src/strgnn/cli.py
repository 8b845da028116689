"""``strgnn`` command line: ingest, inject, train, evaluate, score, sweep.

Settings come from built-in defaults, then the run config stored in a
checkpoint (evaluate/score), then ``--config FILE`` (JSON), then flags.
Errors end the process with a single JSON line on stderr and exit code
2 (usage), 3 (config), 4 (data) or 5 (numeric).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .evaluation import EvaluationError, build_report, export_report, roc_auc
from .graph import (
    ACCUMULATED,
    EQUAL_COUNT,
    EQUAL_TIME,
    TIME_EVOLVING,
    DynamicGraph,
    EdgeStream,
    GraphError,
    build_snapshots,
    export_edges,
    ingest_edge_stream,
    summarize,
)
from .gsfe import ConfigError
from .model import CheckpointMismatch, StrGNN
from .sampling import InjectionError, InjectionSpec, SamplingError, inject_anomalies
from .subgraph import CandidateEdge, WindowError
from .synthetic import two_community_stream
from .trainer import (
    NumericError,
    TrainConfig,
    candidates_from_edges,
    cross_validate,
    fit,
    predict_scores,
    run_experiment,
    split_dataset,
    write_log,
)

OUTPUT_ENV = "STRGNN_OUTPUT_DIR"
SYNTHETIC_SNAPSHOTS = 20
EXIT_USAGE, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4, 5

log = logging.getLogger("strgnn")

TRAIN_KEYS = [f.name for f in dataclasses.fields(TrainConfig)]


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    data: str | None = None
    synthetic: bool = False
    snapshots: int | None = None  # required for --data; the generator uses SYNTHETIC_SNAPSHOTS
    partition: str = EQUAL_COUNT
    graph_mode: str = TIME_EVOLVING
    fraction: float = 0.05
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.partition not in (EQUAL_COUNT, EQUAL_TIME):
            raise ConfigError(f"unknown partition {self.partition!r}")
        if self.graph_mode not in (TIME_EVOLVING, ACCUMULATED):
            raise ConfigError(f"unknown graph mode {self.graph_mode!r}")
        if self.snapshots is not None and self.snapshots < 2:
            raise ConfigError("snapshots must be >= 2")
        if not 0 <= self.fraction < 1:
            raise ConfigError("fraction must be in [0, 1)")

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        own = {f.name for f in dataclasses.fields(cls)} - {"train"}
        unknown = set(values) - own - set(TRAIN_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            train = TrainConfig(**{k: v for k, v in values.items() if k in TRAIN_KEYS})
            return cls(train=train, **{k: v for k, v in values.items() if k in own})
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "train"}
        out.update(self.train.to_dict())
        return out


@dataclass
class Dataset:
    graph: DynamicGraph
    stream: EdgeStream
    candidates: list[CandidateEdge]
    accept: Callable[[int, int], bool] | None


def load_dataset(cfg: RunConfig) -> Dataset:
    accept = None
    snapshots = cfg.snapshots
    if cfg.synthetic:
        snapshots = snapshots or SYNTHETIC_SNAPSHOTS
        gen = two_community_stream(num_snapshots=snapshots, seed=cfg.train.seed)
        stream = EdgeStream(gen.edges, {str(i): i for i in range(gen.num_nodes)})
        accept = gen.cross_community
    elif cfg.data:
        if snapshots is None:
            raise ConfigError("--snapshots is required with --data")
        stream = ingest_edge_stream(cfg.data)
    else:
        raise ConfigError("no dataset: pass --data PATH or --synthetic")
    graph = build_snapshots(stream.edges, snapshots, cfg.partition, cfg.graph_mode, stream.num_nodes)
    return Dataset(graph, stream, candidates_from_edges(stream.edges, graph), accept)


# ---------------------------------------------------------------------------
# candidate files: "src dst snapshot [label]" with raw node keys


def write_candidates(path: Path, candidates, keys: list[str]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("# src dst snapshot label\n")
        for c in candidates:
            fh.write(f"{keys[c.x]} {keys[c.y]} {c.t} {c.y_label}\n")


def read_candidates(path: str | Path, node_map: dict[str, int]) -> list[CandidateEdge]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].replace(",", " ").split()
            if not line:
                continue
            if len(line) not in (3, 4):
                raise GraphError(f"{path}:{line_no}: expected 'src dst snapshot [label]'")
            try:
                x, y = node_map[line[0]], node_map[line[1]]
            except KeyError as exc:
                raise GraphError(f"{path}:{line_no}: unknown node {exc.args[0]!r}") from None
            try:
                t = int(line[2])
                label = int(line[3]) if len(line) == 4 else -1
            except ValueError:
                raise GraphError(f"{path}:{line_no}: snapshot and label must be integers") from None
            out.append(CandidateEdge(x, y, t, label))
    if not out:
        raise GraphError(f"{path}: no candidates")
    return out


# ---------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _common(sweep: bool = False) -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("run")
    g.add_argument("--config", help="JSON file with run settings; flags override it")
    g.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./strgnn-out)")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int, help="processes for subgraph extraction (default: CPU count)")
    g.add_argument("-v", "--verbose", action="store_true")
    d = p.add_argument_group("data")
    d.add_argument("--data", help="edge list: src dst time [label] per line")
    d.add_argument("--synthetic", action="store_true", default=None, help="use the two-community generator")
    d.add_argument("--snapshots", type=int)
    d.add_argument("--partition", choices=[EQUAL_COUNT, EQUAL_TIME])
    d.add_argument("--graph-mode", dest="graph_mode", choices=[TIME_EVOLVING, ACCUMULATED])
    t = p.add_argument_group("model and training")
    single_int, single_float = (str, str) if sweep else (int, float)
    t.add_argument("--h", type=single_int, help="hops" + (" (comma list)" if sweep else ""))
    t.add_argument("--w", type=single_int, help="window" + (" (comma list)" if sweep else ""))
    t.add_argument("--fraction", type=single_float, help="injected anomaly fraction")
    t.add_argument("--train-ratio", dest="train_ratio", type=single_float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch", "--batch-size", dest="batch_size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--beta1", type=float)
    t.add_argument("--beta2", type=float)
    t.add_argument("--adam-eps", dest="adam_eps", type=float)
    t.add_argument("--channels", type=_int_list, help="GCN widths, e.g. 32,32,32")
    t.add_argument("--hidden", type=int)
    t.add_argument("--sortpool-rate", dest="sortpool_rate", type=float)
    t.add_argument("--negatives", dest="negatives_per_positive", type=float)
    t.add_argument("--val-fraction", dest="val_fraction", type=float)
    return p


CONFIG_FLAGS = ["data", "synthetic", "snapshots", "partition", "graph_mode", "fraction", "seed", "workers"]
CONFIG_FLAGS += [k for k in TRAIN_KEYS if k not in CONFIG_FLAGS]


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return values


def resolve_config(args, base: dict | None = None, skip=()) -> RunConfig:
    values = {"workers": os.cpu_count() or 1}
    values.update(base or {})
    if args.config:
        values.update(_read_json(args.config))
    for key in CONFIG_FLAGS:
        if key in skip:
            continue
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig.from_mapping(values)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "strgnn-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _load_checkpoint(path: str) -> tuple[StrGNN, dict]:
    if not Path(path).is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return StrGNN.load(path)


def _test_candidates(cfg: RunConfig, ds: Dataset) -> list[CandidateEdge]:
    # same split and injection stream as trainer.run_experiment
    split = split_dataset(ds.candidates, cfg.train.train_ratio, cfg.train.w)
    rng = np.random.default_rng(cfg.train.seed)
    return inject_anomalies(ds.graph, split.test, InjectionSpec(cfg.fraction), rng, accept=ds.accept)


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    cfg = resolve_config(args)
    ds = load_dataset(cfg)
    summary = summarize(ds.graph, ds.stream)
    summary["candidates"] = len(ds.candidates)
    out = _out_dir(args)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if args.export:
        export_edges(args.export, ds.stream.edges, ds.stream.node_keys())
    _emit(summary)
    return 0


def cmd_inject(args) -> int:
    cfg = resolve_config(args)
    ds = load_dataset(cfg)
    test = _test_candidates(cfg, ds)
    path = _out_dir(args) / "candidates.txt"
    write_candidates(path, test, ds.stream.node_keys())
    injected = sum(c.y_label == 1 for c in test)
    _emit({"candidates": len(test), "injected": injected, "path": str(path)})
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    ds = load_dataset(cfg)
    split = split_dataset(ds.candidates, cfg.train.train_ratio, cfg.train.w)
    out = _out_dir(args)
    result = fit(ds.graph, split.train, cfg.train)
    echo = cfg.to_dict()
    result.model.save(out / "model.ckpt", echo)
    write_log(out / "train_log.jsonl", result.log)
    (out / "config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _emit(
        {
            "best_epoch": result.best_epoch,
            "best_val_auc": result.best_val_auc,
            "checkpoint": str(out / "model.ckpt"),
            "dropped": split.dropped,
            "train": result.train_size,
            "val": result.val_size,
        }
    )
    return 0


def _score(model: StrGNN, cfg: RunConfig, ds: Dataset, candidates) -> tuple[np.ndarray, np.ndarray]:
    return predict_scores(model, ds.graph, candidates, cfg.train.h, cfg.train.w, workers=cfg.train.workers)


def cmd_evaluate(args) -> int:
    model, meta = _load_checkpoint(args.checkpoint)
    cfg = resolve_config(args, meta.get("run"))
    ds = load_dataset(cfg)
    if args.candidates:
        test = read_candidates(args.candidates, ds.stream.node_map)
    else:
        test = _test_candidates(cfg, ds)
    scores, hidden = _score(model, cfg, ds, test)
    labels = np.array([c.y_label for c in test])
    report = build_report(scores, labels, hidden, [(c.x, c.y, c.t) for c in test], cfg.to_dict())
    keys = ds.stream.node_keys()
    report.candidates = [(keys[c.x], keys[c.y], c.t) for c in test]
    export_report(report, _out_dir(args))
    _emit({"auc": report.auc, "candidates": len(test), "anomalous": int(labels.sum())})
    return 0


def cmd_score(args) -> int:
    model, meta = _load_checkpoint(args.checkpoint)
    cfg = resolve_config(args, meta.get("run"))
    ds = load_dataset(cfg)
    cands = read_candidates(args.candidates, ds.stream.node_map)
    scores, _ = _score(model, cfg, ds, cands)
    keys = ds.stream.node_keys()
    path = _out_dir(args) / "scores.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["src", "dst", "snapshot", "score", "label"])
        for c, s in zip(cands, scores.tolist()):
            writer.writerow([keys[c.x], keys[c.y], c.t, repr(s), c.y_label])
    payload = {"candidates": len(cands), "path": str(path)}
    labels = np.array([c.y_label for c in cands])
    if set(labels.tolist()) == {0, 1}:
        payload["auc"] = roc_auc(scores, labels)
    _emit(payload)
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve_config(args, skip=("h", "w", "fraction", "train_ratio"))
    grid = {
        "h": _int_list(args.h) if args.h else [cfg.train.h],
        "w": _int_list(args.w) if args.w else [cfg.train.w],
        "fraction": _float_list(args.fraction) if args.fraction else [cfg.fraction],
        "train_ratio": _float_list(args.train_ratio) if args.train_ratio else [cfg.train.train_ratio],
    }
    if args.repeats < 1:
        raise ConfigError("--repeats must be >= 1")
    rows = []
    for h, w, fraction, ratio in itertools.product(*grid.values()):
        aucs, cv = [], []
        for r in range(args.repeats):
            run = RunConfig.from_mapping(
                {**cfg.to_dict(), "h": h, "w": w, "fraction": fraction, "train_ratio": ratio, "seed": cfg.train.seed + r}
            )
            ds = load_dataset(run)
            if args.cv:
                split = split_dataset(ds.candidates, ratio, w)
                cv.extend(cross_validate(ds.graph, split.train, run.train, args.cv))
            else:
                aucs.append(run_experiment(ds.graph, ds.candidates, run.train, fraction, accept=ds.accept).auc)
            log.info("h=%d w=%d fraction=%g ratio=%g repeat %d done", h, w, fraction, ratio, r)
        values = cv if args.cv else aucs
        rows.append([h, w, fraction, ratio, repr(float(np.mean(values))), repr(float(np.std(values))), len(values)])
    header = ["h", "w", "fraction", "train_ratio", "cv_auc" if args.cv else "auc", "std", "runs"]
    path = _out_dir(args) / "sweep.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    sys.stdout.write(path.read_text(encoding="utf-8"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="strgnn", description="Structural temporal GNN anomalous-edge detection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()

    p = sub.add_parser("ingest", parents=[common], help="summarise an edge stream and its snapshots")
    p.add_argument("--export", help="also write the parsed stream in canonical form")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("inject", parents=[common], help="write test candidates with injected anomalies")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("train", parents=[common], help="fit a model; writes checkpoint and training log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score the test period and write report files")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--candidates", help="labelled candidate file instead of fresh injection")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score", parents=[common], help="score an ad-hoc candidate file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--candidates", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sweep", parents=[_common(sweep=True)], help="AUC table over a grid of settings")
    p.add_argument("--repeats", type=int, default=1, help="seeds per grid point (seed, seed+1, ...)")
    p.add_argument("--cv", type=int, default=0, help="report rolling cross-validation AUC with this many folds")
    p.set_defaults(func=cmd_sweep)
    return parser


def _fail(kind: str, code: int, exc: BaseException | str) -> int:
    message = str(exc) if not isinstance(exc, str) else exc
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, exc)
    except (GraphError, OSError, WindowError, SamplingError, InjectionError, CheckpointMismatch, EvaluationError) as exc:
        return _fail("data", EXIT_DATA, exc)
    except (NumericError, FloatingPointError) as exc:
        return _fail("numeric", EXIT_NUMERIC, exc)


if __name__ == "__main__":
    sys.exit(main())
