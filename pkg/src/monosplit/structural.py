"""Structural dependency features from the inter-class call graph.

Directed call counts between classes are normalized by the callee's total
incoming calls (its influence share), and the two directed influences of
a pair are averaged into a symmetric dependency score in [0, 1]. The
binary adjacency used by the clustering model marks every pair with a
positive dependency score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import ProjectGraph


@dataclass
class CallCountMatrix:
    """counts[i, j] = number of call sites from class i into class j."""

    counts: np.ndarray  # (Y, Y) nonnegative ints, zero diagonal

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]


@dataclass
class DependencyMatrix:
    """Symmetric pairwise dependency scores in [0, 1], zero diagonal.

    `influence` is the directed, column-normalized intermediate kept for
    auditing: influence[i, j] = counts[i, j] / indegree(j), with columns
    of never-called classes left at zero.
    """

    values: np.ndarray
    influence: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.values.shape[0]


@dataclass
class AdjacencyMatrix:
    entries: np.ndarray  # (Y, Y) 0/1 ints, symmetric, zero diagonal

    @property
    def n_classes(self) -> int:
        return self.entries.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.entries.sum()) // 2

    def edge_list(self) -> list[tuple[int, int]]:
        """Unordered edges as (i, j) with i < j, lexicographic order."""
        ii, jj = np.nonzero(np.triu(self.entries, k=1))
        return list(zip(ii.tolist(), jj.tolist()))


def call_counts(graph: ProjectGraph) -> CallCountMatrix:
    y = graph.n_classes
    counts = np.zeros((y, y), dtype=np.int64)
    for (ci, cj), n in graph.class_pair_calls().items():
        counts[ci, cj] += n
    return CallCountMatrix(counts=counts)


def structural_matrix(counts: CallCountMatrix) -> DependencyMatrix:
    """Average the two directed influence shares of every class pair.

    A class with no incoming calls contributes zero influence columns
    (rather than 0/0), so the result stays finite.
    """
    c = counts.counts.astype(np.float64)
    indegree = c.sum(axis=0)
    influence = np.zeros_like(c)
    called = indegree > 0
    influence[:, called] = c[:, called] / indegree[called]
    values = (influence + influence.T) / 2.0
    np.fill_diagonal(values, 0.0)
    return DependencyMatrix(values=values, influence=influence)


def adjacency(s: DependencyMatrix) -> AdjacencyMatrix:
    entries = (s.values > 0).astype(np.int64)
    np.fill_diagonal(entries, 0)
    return AdjacencyMatrix(entries=entries)


def structural_to_dict(s: DependencyMatrix) -> dict:
    """Serializable structural-feature document: dense matrix, the
    influence intermediate, and a sparse edge list for graph consumers."""
    ii, jj = np.nonzero(np.triu(s.values, k=1))
    return {
        "matrix": s.values.tolist(),
        "influence": s.influence.tolist(),
        "edges": [
            [int(i), int(j), float(s.values[i, j])] for i, j in zip(ii, jj)
        ],
    }


def structural_from_dict(data: dict) -> DependencyMatrix:
    values = np.asarray(data["matrix"], dtype=np.float64)
    influence = np.asarray(
        data.get("influence", np.zeros_like(values)), dtype=np.float64
    )
    return DependencyMatrix(values=values, influence=influence)
