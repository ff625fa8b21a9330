"""Fusing memberships and extracting service candidates.

The two trained membership matrices (semantic and structural) are row
normalized, blended with a convex weight alpha, and thresholded at tau:
a class joins every service whose fused membership reaches tau, classes
reaching no service become outliers. A hard argmax assignment is kept
as the non-overlapping ablation. run_sweep trains each (N, seed) pair
once, scans the (alpha, tau) grid on the cached matrices, scores every
cell, and selects the best composite score.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ingest import ProjectGraph
from .metrics import MetricError, MetricReport, metric_qscore, score_decomposition
from .nocd import MembershipMatrix, TrainConfig, TrainingError, TrainResult, train_nocd
from .semantic import FeatureMatrix
from .structural import adjacency, call_counts, structural_matrix

log = logging.getLogger(__name__)


class SweepError(Exception):
    """Raised when no sweep cell produced a scorable decomposition."""


@dataclass
class Decomposition:
    """Overlapping assignment of classes to services.

    services hold sorted class ids; a class may appear in several.
    source_columns maps each retained service back to the membership
    matrix column it came from (empty columns are dropped).
    n_clusters is the post-drop service count.
    """

    services: list[list[int]]
    outliers: list[int]
    alpha: float | None = None
    tau: float | None = None
    n_clusters: int = 0
    source_columns: list[int] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_clusters == 0:
            self.n_clusters = len(self.services)

    def covered_classes(self) -> set[int]:
        out = set(self.outliers)
        for svc in self.services:
            out.update(svc)
        return out

    def to_dict(self) -> dict:
        provenance = dict(self.provenance)
        if self.source_columns:
            provenance["source_columns"] = list(self.source_columns)
        return {
            "services": [list(s) for s in self.services],
            "outliers": list(self.outliers),
            "alpha": self.alpha,
            "tau": self.tau,
            "n_clusters": self.n_clusters,
            "provenance": provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Decomposition":
        provenance = dict(data.get("provenance", {}))
        source_columns = provenance.pop("source_columns", [])
        return cls(
            services=[sorted(int(c) for c in s) for s in data["services"]],
            outliers=sorted(int(c) for c in data["outliers"]),
            alpha=data.get("alpha"),
            tau=data.get("tau"),
            n_clusters=int(data.get("n_clusters") or len(data["services"])),
            source_columns=[int(c) for c in source_columns],
            provenance=provenance,
        )


def normalize_memberships(m: MembershipMatrix) -> MembershipMatrix:
    """Divide each row by its sum. All-zero rows stay zero, so the class
    falls below any threshold and lands in the outliers."""
    if (m.values < 0).any():
        raise ValueError("membership values must be nonnegative")
    sums = m.values.sum(axis=1)
    out = m.values.astype(np.float64).copy()
    nonzero = sums > 0
    out[nonzero] = out[nonzero] / sums[nonzero, None]
    n_zero = int((~nonzero).sum())
    if n_zero:
        log.warning("%d membership rows are all-zero and will become outliers", n_zero)
    return MembershipMatrix(values=out, kind=m.kind)


def fuse(m_sem: MembershipMatrix, m_str: MembershipMatrix, alpha: float) -> MembershipMatrix:
    """Convex combination alpha * semantic + (1 - alpha) * structural."""
    if m_sem.values.shape != m_str.values.shape:
        raise ValueError(
            f"membership shapes differ: {m_sem.values.shape} vs {m_str.values.shape}"
        )
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must be in [0, 1]")
    values = alpha * m_sem.values + (1.0 - alpha) * m_str.values
    return MembershipMatrix(values=values, kind="fused")


def threshold_assign(
    m: MembershipMatrix,
    tau: float,
    alpha: float | None = None,
    provenance: dict | None = None,
) -> Decomposition:
    """Service j keeps every class whose membership in column j is at
    least tau (inclusive). Classes below tau everywhere are outliers.
    Empty columns are dropped but remembered in source_columns."""
    if not (0.0 < tau < 1.0):
        raise ValueError("tau must be in (0, 1)")
    hits = m.values >= tau
    services: list[list[int]] = []
    source_columns: list[int] = []
    for j in range(m.n_clusters):
        members = np.nonzero(hits[:, j])[0]
        if len(members):
            services.append(members.tolist())
            source_columns.append(j)
    outliers = np.nonzero(~hits.any(axis=1))[0].tolist()
    return Decomposition(
        services=services,
        outliers=outliers,
        alpha=alpha,
        tau=tau,
        source_columns=source_columns,
        provenance=dict(provenance or {}),
    )


def hard_assign(m: MembershipMatrix, provenance: dict | None = None) -> Decomposition:
    """Non-overlapping ablation: each class goes to its argmax column,
    ties to the lowest index. All-zero rows become outliers."""
    best = np.argmax(m.values, axis=1)
    row_max = m.values.max(axis=1)
    outliers = np.nonzero(row_max == 0)[0].tolist()
    outlier_set = set(outliers)
    services: list[list[int]] = []
    source_columns: list[int] = []
    for j in range(m.n_clusters):
        members = [i for i in np.nonzero(best == j)[0].tolist() if i not in outlier_set]
        if members:
            services.append(members)
            source_columns.append(j)
    return Decomposition(
        services=services,
        outliers=outliers,
        source_columns=source_columns,
        provenance=dict(provenance or {}),
    )


@dataclass
class SweepGrid:
    alphas: list[float]
    taus: list[float]
    cluster_counts: list[int]
    seeds: list[int]

    def __post_init__(self) -> None:
        if not self.alphas or not self.taus or not self.cluster_counts or not self.seeds:
            raise ValueError("sweep grid axes must be non-empty")
        if any(not (0.0 <= a <= 1.0) for a in self.alphas):
            raise ValueError("alphas must lie in [0, 1]")
        if any(not (0.0 < t < 1.0) for t in self.taus):
            raise ValueError("taus must lie in (0, 1)")
        if any(n < 2 for n in self.cluster_counts):
            raise ValueError("cluster counts must be >= 2")
        self.cluster_counts = sorted(set(self.cluster_counts), reverse=True)

    @property
    def n_cells(self) -> int:
        return (
            len(self.alphas) * len(self.taus) * len(self.cluster_counts) * len(self.seeds)
        )

    def to_dict(self) -> dict:
        return {
            "alphas": self.alphas,
            "taus": self.taus,
            "cluster_counts": self.cluster_counts,
            "seeds": self.seeds,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepGrid":
        return cls(
            alphas=[float(a) for a in data["alphas"]],
            taus=[float(t) for t in data["taus"]],
            cluster_counts=[int(n) for n in data["cluster_counts"]],
            seeds=[int(s) for s in data["seeds"]],
        )


def default_cluster_counts(n_classes: int) -> list[int]:
    """ceil(Y/2) down to 2 in steps of 2; always at least [2]."""
    start = math.ceil(n_classes / 2)
    counts = list(range(start, 1, -2))
    return counts or [2]


def budget_cluster_counts(n_classes: int, budget: str) -> list[int]:
    """Cut the full descending count range into thirds: high keeps the
    largest counts, low the smallest. Short ranges fall back to the full
    list rather than an empty slice."""
    full = default_cluster_counts(n_classes)
    order = {"high": 0, "medium": 1, "low": 2}
    if budget not in order:
        raise ValueError(f"unknown budget {budget!r}; expected high, medium, or low")
    parts = [chunk.tolist() for chunk in np.array_split(np.asarray(full), 3)]
    chunk = parts[order[budget]]
    return [int(c) for c in chunk] if chunk else full


def default_grid(n_classes: int, seeds: list[int] | None = None) -> SweepGrid:
    return SweepGrid(
        alphas=[round(0.05 * i, 2) for i in range(21)],
        taus=[round(0.05 * i, 2) for i in range(1, 20)],
        cluster_counts=default_cluster_counts(n_classes),
        seeds=list(seeds) if seeds else [0],
    )


@dataclass
class SweepCell:
    n_clusters: int
    seed: int
    alpha: float
    tau: float
    decomposition: Decomposition | None = None
    report: MetricReport | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        out: dict = {
            "n_clusters": self.n_clusters,
            "seed": self.seed,
            "alpha": self.alpha,
            "tau": self.tau,
        }
        if self.decomposition is not None:
            out["decomposition"] = self.decomposition.to_dict()
        if self.report is not None:
            out["report"] = self.report.to_dict()
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class SweepResult:
    cells: list[SweepCell]
    best_index: int
    # trained matrices per (n_clusters, seed), row-normalized, plus the
    # per-kind training stats; carried so callers can persist and serve
    # them without retraining
    memberships: dict = field(default_factory=dict)
    train_meta: dict = field(default_factory=dict)

    @property
    def best(self) -> SweepCell:
        return self.cells[self.best_index]

    def to_dict(self) -> dict:
        return {
            "cells": [c.to_dict() for c in self.cells],
            "best_index": self.best_index,
        }


def train_memberships(
    features: FeatureMatrix,
    a,
    n_clusters: int,
    cfg: TrainConfig,
) -> tuple[MembershipMatrix, TrainResult]:
    """Train one NOCD instance and row-normalize its output."""
    result = train_nocd(features, a, n_clusters, cfg)
    return normalize_memberships(result.membership), result


def run_sweep(
    project: ProjectGraph,
    features_sem: FeatureMatrix,
    features_str: FeatureMatrix,
    grid: SweepGrid,
    cfg: TrainConfig,
) -> SweepResult:
    """Scan the full grid. Each (N, seed) trains the two NOCD instances
    once; every (alpha, tau) cell reuses those cached matrices. Cells
    that fail to train or score are recorded and skipped; if nothing
    survives the sweep fails."""
    counts = call_counts(project)
    s_str = structural_matrix(counts)
    a = adjacency(s_str)

    cache: dict[tuple[int, int], tuple[MembershipMatrix, MembershipMatrix] | str] = {}
    train_meta: dict[tuple[str, int, int], dict] = {}
    cells: list[SweepCell] = []
    for n in grid.cluster_counts:
        for seed in grid.seeds:
            key = (n, seed)
            if key not in cache:
                try:
                    run_cfg = replace(cfg, seed=seed)
                    m_sem, r_sem = train_memberships(features_sem, a, n, run_cfg)
                    m_str, r_str = train_memberships(features_str, a, n, run_cfg)
                    cache[key] = (m_sem, m_str)
                    for kind, r in (("semantic", r_sem), ("structural", r_str)):
                        train_meta[(kind, n, seed)] = {
                            "epochs_ran": r.epochs_ran,
                            "best_val_loss": r.best_val_loss,
                        }
                except (TrainingError, ValueError) as exc:
                    log.warning("training failed for N=%d seed=%d: %s", n, seed, exc)
                    cache[key] = str(exc)
            trained = cache[key]
            for alpha in grid.alphas:
                for tau in grid.taus:
                    cell = SweepCell(n_clusters=n, seed=seed, alpha=alpha, tau=tau)
                    if isinstance(trained, str):
                        cell.error = f"training failed: {trained}"
                        cells.append(cell)
                        continue
                    m_sem, m_str = trained
                    fused = fuse(m_sem, m_str, alpha)
                    d = threshold_assign(
                        fused, tau, alpha=alpha,
                        provenance={"n_clusters": n, "seed": seed},
                    )
                    try:
                        cell.report = score_decomposition(d, project)
                        cell.decomposition = d
                    except MetricError as exc:
                        cell.error = f"scoring failed: {exc}"
                    cells.append(cell)

    scored = [i for i, c in enumerate(cells) if c.report is not None]
    if not scored:
        raise SweepError("every sweep cell failed; nothing to select")
    qscores = metric_qscore([cells[i].report for i in scored])
    for i, q in zip(scored, qscores):
        cells[i].report.qscore = q
    best_index = max(scored, key=lambda i: (cells[i].report.qscore, -i))
    trained = {k: v for k, v in cache.items() if not isinstance(v, str)}
    return SweepResult(
        cells=cells,
        best_index=best_index,
        memberships=trained,
        train_meta=train_meta,
    )
