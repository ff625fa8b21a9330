"""Shared fixtures: the toy Java corpus and synthetic graph builders."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from monosplit.ingest import ClassArtifact, MethodDecl, ProjectGraph, parse_java_project
from monosplit.structural import AdjacencyMatrix

FIXTURES = Path(__file__).parent / "fixtures"
TOYSHOP = FIXTURES / "toyshop"


@pytest.fixture(scope="session")
def toyshop():
    """Parsed 10-class fixture project plus its diagnostics."""
    return parse_java_project(TOYSHOP)


@pytest.fixture(scope="session")
def toyshop_project(toyshop):
    return toyshop[0]


def synthetic_project(y: int, pair_counts: dict[tuple[int, int], int]) -> ProjectGraph:
    """Minimal project with one method per class (method_id == class_id)
    and class-level calls given by pair_counts."""
    classes = [
        ClassArtifact(
            class_id=i,
            qualified_name=f"p.C{i}",
            tokens=["class", f"C{i}"],
            comments=[],
            flat_ast=[f"C{i}"],
            methods=[MethodDecl(method_id=i, owner_class_id=i, simple_name="m", arity=0)],
        )
        for i in range(y)
    ]
    inter = sorted((i, j, n) for (i, j), n in pair_counts.items())
    graph = ProjectGraph(
        classes=classes,
        intra_edges=[[] for _ in range(y)],
        inter_edges=inter,
    )
    graph.validate()
    return graph


def adjacency_from_edges(y: int, edges: list[tuple[int, int]]) -> AdjacencyMatrix:
    a = np.zeros((y, y), dtype=np.int64)
    for i, j in edges:
        a[i, j] = a[j, i] = 1
    np.fill_diagonal(a, 0)
    return AdjacencyMatrix(entries=a)


def two_clique_edges(k: int = 5) -> list[tuple[int, int]]:
    """Two disjoint k-cliques on nodes 0..k-1 and k..2k-1."""
    edges = []
    for base in (0, k):
        for i in range(k):
            for j in range(i + 1, k):
                edges.append((base + i, base + j))
    return edges


def bridged_clique_edges(k: int = 5, bridge_degree: int = 3) -> list[tuple[int, int]]:
    """Two k-cliques plus node 2k connected to bridge_degree nodes of
    each clique."""
    edges = two_clique_edges(k)
    bridge = 2 * k
    for base in (0, k):
        for i in range(bridge_degree):
            edges.append((base + i, bridge))
    return edges


def planted_project(edges: list[tuple[int, int]], y: int) -> ProjectGraph:
    """Project whose class calls realize the given undirected edges
    (one call in each direction, so the structural graph matches)."""
    counts: dict[tuple[int, int], int] = {}
    for i, j in edges:
        counts[(i, j)] = counts.get((i, j), 0) + 1
        counts[(j, i)] = counts.get((j, i), 0) + 1
    return synthetic_project(y, counts)


# Training settings that reliably separate the planted cliques. The
# defaults aim at real projects; on an 11-node graph they stop too early
# and with too wide a hidden layer to pull the two communities apart.
PLANTED_HIDDEN = 64


def planted_train_config(seed: int):
    from monosplit.nocd import TrainConfig

    return TrainConfig(
        seed=seed, learning_rate=1e-2, dropout=0.5, max_epochs=1000, patience=100
    )


def fd_instance(rng: np.random.Generator):
    """Random instance for finite-difference gradient checks.

    Rejects draws whose forward pass sits near a ReLU kink or near the
    loss clamp; central differences straddle the non-smooth point there
    and disagree with any one-sided convention. Returns
    (atilde, x, params, edges, negatives, l2).
    """
    from monosplit.nocd import (
        GcnParams, NormalizedAdjacency, forward_pass, non_edge_pairs,
        normalize_adjacency,
    )

    while True:
        y = int(rng.integers(4, 11))
        d = int(rng.integers(2, 7))
        n = int(rng.integers(2, 5))
        h = int(rng.integers(3, 9))
        upper = [(i, j) for i in range(y) for j in range(i + 1, y)]
        density = rng.uniform(0.3, 0.7)
        edges = [p for p in upper if rng.random() < density]
        if len(edges) < 2:
            continue
        a = adjacency_from_edges(y, edges)
        atilde = normalize_adjacency(a)
        x = rng.uniform(0.1, 1.0, size=(y, d))
        params = GcnParams(
            w1=rng.normal(0.0, 0.6, size=(d, h)),
            w2=rng.uniform(0.05, 0.7, size=(h, n)),
        )
        state = forward_pass(atilde, x, params)
        # guard: away from ReLU kinks and from the clamped-log region
        if np.abs(state.h1_pre).min() < 1e-3 or np.abs(state.m_pre).min() < 1e-3:
            continue
        s = np.einsum("ij,ij->i", state.m[[i for i, _ in edges]], state.m[[j for _, j in edges]])
        if s.min() < 5e-2:
            continue
        pool = non_edge_pairs(a)
        negatives = [p for p in pool if rng.random() < 0.5]
        l2 = float(rng.choice([0.0, 1e-5, 1e-3]))
        return atilde, x, params, edges, negatives, l2


def random_metric_instance(rng: np.random.Generator):
    """Random tiny project plus an overlapping decomposition, for metric
    oracle tests (Y <= 10, N <= 4)."""
    from monosplit.decompose import Decomposition

    y = int(rng.integers(4, 11))
    n = int(rng.integers(1, 5))
    services = []
    for _ in range(n):
        size = int(rng.integers(1, y + 1))
        services.append(sorted(rng.choice(y, size=size, replace=False).tolist()))
    covered = set()
    for svc in services:
        covered.update(svc)
    outliers = sorted(set(range(y)) - covered)
    d = Decomposition(services=services, outliers=outliers)
    counts: dict[tuple[int, int], int] = {}
    for _ in range(int(rng.integers(0, 9))):
        u, v = int(rng.integers(0, y)), int(rng.integers(0, y))
        if u != v:
            counts[(u, v)] = counts.get((u, v), 0) + int(rng.integers(1, 6))
    return synthetic_project(y, counts), d


def brute_force_metrics(project, d) -> tuple[float, float, float, float]:
    """First-principles recomputation of SM, ICP, IFN, NED by direct
    enumeration. Accumulation follows service list order so results are
    bit-identical to the library, not merely close."""
    calls: dict[tuple[int, int], int] = {}
    for caller_m, callee_m, count in project.inter_edges:
        owner = project.method_owner()
        calls[(owner[caller_m], owner[callee_m])] = (
            calls.get((owner[caller_m], owner[callee_m]), 0) + count
        )
    services = [list(s) for s in d.services]

    def shared(u: int, v: int) -> bool:
        return any(u in svc and v in svc for svc in services)

    linked = set()
    for (u, v) in calls:
        linked.add((min(u, v), max(u, v)))

    n = len(services)
    cohesion = 0.0
    for svc in services:
        mu = sum(1 for u, v in linked if u in svc and v in svc)
        cohesion += mu / len(svc) ** 2
    cohesion /= n
    sm = cohesion
    if n > 1:
        coupling = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                sigma = 0
                for u, v in linked:
                    if shared(u, v):
                        continue
                    across = (u in services[i] and v in services[j]) or (
                        u in services[j] and v in services[i]
                    )
                    if across:
                        sigma += 1
                coupling += sigma / (2 * len(services[i]) * len(services[j]))
        coupling /= n * (n - 1) / 2
        sm = cohesion - coupling

    total = sum(calls.values())
    cross = sum(c for (u, v), c in calls.items() if not shared(u, v))
    icp = cross / total if total else 0.0

    ifn_sum = 0
    for svc in services:
        exposed = set()
        for (u, v) in calls:
            if v in svc and u not in svc:
                exposed.add(v)
        ifn_sum += len(exposed)
    ifn = ifn_sum / n

    sizes = [len(s) for s in services]
    ned = 1.0 - sum(s for s in sizes if 5 <= s <= 20) / sum(sizes)
    return sm, icp, ifn, ned


def random_fused_matrix(rng: np.random.Generator):
    """Row-normalized nonnegative matrix with occasional all-zero rows,
    shaped like a fused membership."""
    from monosplit.nocd import MembershipMatrix

    y = int(rng.integers(2, 12))
    n = int(rng.integers(2, 6))
    values = rng.uniform(size=(y, n)) * (rng.random(size=(y, n)) < 0.8)
    values[rng.random(y) < 0.1] = 0.0
    sums = values.sum(axis=1)
    nz = sums > 0
    values[nz] /= sums[nz, None]
    return MembershipMatrix(values=values, kind="fused")


def check_tau_monotone(rng: np.random.Generator) -> None:
    """One random instance of the tau-nesting property: raising tau can
    only shrink services (per source column) and grow the outlier set."""
    from monosplit.decompose import threshold_assign

    m = random_fused_matrix(rng)
    tau1 = float(rng.uniform(0.05, 0.5))
    tau2 = float(rng.uniform(tau1 + 1e-6, 0.95))
    d1 = threshold_assign(m, tau1)
    d2 = threshold_assign(m, tau2)
    low = dict(zip(d1.source_columns, d1.services))
    for col, svc in zip(d2.source_columns, d2.services):
        assert col in low, f"column {col} vanished at the lower tau"
        assert set(svc) <= set(low[col])
    assert set(d1.outliers) <= set(d2.outliers)


def fd_gradient_check(rng: np.random.Generator, step: float = 1e-5) -> float:
    """Worst elementwise relative error between analytic and central
    finite-difference gradients on one random instance."""
    from monosplit.nocd import bp_loss, bp_loss_gradient, forward_pass

    atilde, x, params, edges, negatives, l2 = fd_instance(rng)

    def objective() -> float:
        st = forward_pass(atilde, x, params)
        return bp_loss(st.m, edges, negatives) + l2 * (
            float((params.w1 ** 2).sum()) + float((params.w2 ** 2).sum())
        )

    state = forward_pass(atilde, x, params)
    dw1, dw2 = bp_loss_gradient(state, edges, negatives, params, l2)
    worst = 0.0
    for w, dw in ((params.w1, dw1), (params.w2, dw2)):
        fd = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + step
            hi = objective()
            w[idx] = orig - step
            lo = objective()
            w[idx] = orig
            fd[idx] = (hi - lo) / (2 * step)
        # floor the denominator: central differences of an O(10) objective
        # carry ~1e-8 absolute noise at step 1e-5, so entries below 1e-3
        # are held to a matching absolute tolerance instead
        denom = np.maximum(np.maximum(np.abs(dw), np.abs(fd)), 1e-3)
        worst = max(worst, float((np.abs(dw - fd) / denom).max()))
    return worst
