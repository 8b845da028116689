"""Structural temporal graph neural network for anomalous edge detection."""

from .graph import (
    DynamicGraph,
    EdgeStream,
    Snapshot,
    TemporalEdge,
    bfs_distances,
    build_snapshots,
    ingest_edge_stream,
)
from .evaluation import EvalReport, build_report, export_report, pca_project, roc_auc
from .model import ModelConfig, StrGNN
from .subgraph import CandidateEdge, EnclosingSubgraphWindow, LabeledSubgraph, extract_window
from .synthetic import two_community_stream
from .trainer import TrainConfig, candidates_from_edges, fit, predict_scores, run_experiment, split_dataset

__all__ = [
    "CandidateEdge",
    "DynamicGraph",
    "EdgeStream",
    "EnclosingSubgraphWindow",
    "EvalReport",
    "LabeledSubgraph",
    "ModelConfig",
    "Snapshot",
    "StrGNN",
    "TemporalEdge",
    "TrainConfig",
    "bfs_distances",
    "build_report",
    "build_snapshots",
    "candidates_from_edges",
    "export_report",
    "extract_window",
    "fit",
    "ingest_edge_stream",
    "pca_project",
    "predict_scores",
    "roc_auc",
    "run_experiment",
    "split_dataset",
    "two_community_stream",
]

__version__ = "0.1.0"
