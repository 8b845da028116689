"""ROC-AUC, ROC points, 2-D PCA of hidden states, and report files."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


class EvaluationError(ValueError):
    pass


def _check_binary(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise EvaluationError(f"{len(scores)} scores for {len(labels)} labels")
    if not np.isin(labels, (0, 1)).all():
        raise EvaluationError("labels must be 0/1")
    labels = labels.astype(bool)
    if labels.all() or not labels.any():
        raise EvaluationError("AUC needs both classes present")
    return scores, labels


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score of a positive > score of a negative), ties count 1/2."""
    scores, labels = _check_binary(scores, labels)
    ranks = rankdata(scores)  # average ranks on ties
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(fpr, tpr, thresholds)`` at every distinct score, from (0,0) to (1,1)."""
    scores, labels = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0.0, tp / y.sum()]
    fpr = np.r_[0.0, fp / (~y).sum()]
    thresholds = np.r_[np.inf, s[last]]
    return fpr, tpr, thresholds


def trapezoid_auc(fpr: np.ndarray, tpr: np.ndarray) -> float:
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def _top_eigenvector(c: np.ndarray, tol: float, max_iter: int) -> tuple[float, np.ndarray]:
    dim = c.shape[0]
    v = np.ones(dim) / np.sqrt(dim)
    # a start orthogonal to the leading direction would stall; nudge deterministically
    v = v + np.linspace(0.0, 1e-3, dim)
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        u = c @ v
        norm = np.linalg.norm(u)
        if norm == 0.0:
            return 0.0, v
        u /= norm
        if np.linalg.norm(u - v) < tol:
            v = u
            break
        v = u
    return float(v @ c @ v), v


def pca_project(x: np.ndarray, k: int = 2, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Project rows of ``x`` onto the top-``k`` principal directions.

    Directions come from power iteration with deflation on the covariance.
    Each direction is signed so its largest-magnitude entry is positive.
    Directions with (numerically) zero variance give a zero column.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise EvaluationError("PCA needs at least two points")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (len(x) - 1)
    scale = max(float(np.trace(cov)), 1e-300)
    out = np.zeros((len(x), k))
    for j in range(k):
        lam, v = _top_eigenvector(cov, tol, max_iter)
        if lam <= 1e-12 * scale:
            break
        v = v * np.sign(v[np.argmax(np.abs(v))])
        out[:, j] = centered @ v
        cov = cov - lam * np.outer(v, v)
    return out


@dataclass
class EvalReport:
    auc: float
    fpr: np.ndarray
    tpr: np.ndarray
    scores: np.ndarray
    labels: np.ndarray
    candidates: list[tuple] = field(default_factory=list)  # (src, dst, snapshot) per row
    embedding_2d: np.ndarray | None = None
    config: dict = field(default_factory=dict)

    @property
    def roc(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def build_report(scores, labels, hidden=None, candidates=None, config=None) -> EvalReport:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    fpr, tpr, _ = roc_curve(scores, labels)
    emb = pca_project(hidden, 2) if hidden is not None else None
    return EvalReport(roc_auc(scores, labels), fpr, tpr, scores, labels, list(candidates or []), emb, dict(config or {}))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def export_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_pos = int(report.labels.sum())
    metrics = {
        "auc": report.auc,
        "trapezoid_auc": trapezoid_auc(report.fpr, report.tpr),
        "counts": {"candidates": len(report.labels), "anomalous": n_pos, "normal": len(report.labels) - n_pos},
        "config": report.config,
    }
    paths = [out / "metrics.json", out / "roc.csv", out / "scores.csv"]
    paths[0].write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_csv(paths[1], ["fpr", "tpr"], ((repr(a), repr(b)) for a, b in zip(report.fpr.tolist(), report.tpr.tolist())))
    cands = report.candidates or [("", "", "")] * len(report.scores)
    _write_csv(
        paths[2],
        ["src", "dst", "snapshot", "score", "label"],
        ((*c, repr(float(s)), int(y)) for c, s, y in zip(cands, report.scores, report.labels)),
    )
    if report.embedding_2d is not None:
        paths.append(out / "embedding.csv")
        _write_csv(
            paths[-1],
            ["x", "y", "label"],
            ((repr(float(a)), repr(float(b)), int(y)) for (a, b), y in zip(report.embedding_2d, report.labels)),
        )
    return paths


def read_scores(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["score"]) for r in rows]), np.array([int(r["label"]) for r in rows])
