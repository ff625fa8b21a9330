"""Acceptance gate: one test per core guarantee of the toolkit.

Each test is self-contained and checks a single end-to-end property at
its stated tolerance, so a `pytest -v` run of this file reads as a
pass/fail checklist for the whole package.
"""

import time

import numpy as np
import pytest

from conftest import (
    PLANTED_HIDDEN,
    TOYSHOP,
    adjacency_from_edges,
    brute_force_metrics,
    bridged_clique_edges,
    check_tau_monotone,
    fd_gradient_check,
    planted_project,
    planted_train_config,
    random_metric_instance,
)
from test_structural import scalar_structural

from monosplit.decompose import (
    Decomposition,
    SweepGrid,
    hard_assign,
    normalize_memberships,
    run_sweep,
    threshold_assign,
)
from monosplit.metrics import metric_icp, metric_ned, score_decomposition
from monosplit.nocd import train_nocd
from monosplit.pipeline import PipelineConfig, run_pipeline
from monosplit.semantic import FeatureMatrix
from monosplit.structural import CallCountMatrix, call_counts, structural_matrix
from monosplit.syntax import AstNode, flatten_ast


def planted_features(edges, y):
    s = structural_matrix(call_counts(planted_project(edges, y)))
    return FeatureMatrix(rows=s.values.copy(), kind="structural-as-features")


def test_gradients_match_central_finite_differences():
    rng = np.random.default_rng(1234)
    start = time.perf_counter()
    worst = max(fd_gradient_check(rng, step=1e-5) for _ in range(20))
    elapsed = time.perf_counter() - start
    assert worst < 1e-4
    assert elapsed < 10.0


def test_structural_matrix_matches_scalar_reimplementation():
    rng = np.random.default_rng(42)
    for _ in range(100):
        y = int(rng.integers(2, 13))
        counts = rng.integers(0, 7, size=(y, y))
        np.fill_diagonal(counts, 0)
        s = structural_matrix(CallCountMatrix(counts))
        assert np.max(np.abs(s.values - scalar_structural(counts))) < 1e-12
        col_sums = s.influence.sum(axis=0)
        called = counts.sum(axis=0) > 0
        assert np.allclose(col_sums[called], 1.0, atol=1e-12)
        assert (col_sums[~called] == 0).all()


def test_flatten_reproduces_hand_traced_goldens():
    goldens = [
        (AstNode("x"), ["x"]),
        (
            AstNode("M", [AstNode("a"), AstNode("b")]),
            ["M::left", "a", "b", "M::right"],
        ),
        (
            AstNode("C", [AstNode("f"), AstNode("M", [AstNode("a")])]),
            ["C::left", "f", "M::left", "a", "M::right", "C::right"],
        ),
        (
            AstNode(
                "MethodDeclaration",
                [
                    AstNode("int"),
                    AstNode("count"),
                    AstNode("Parameter", [AstNode("Item"), AstNode("item")]),
                ],
            ),
            [
                "MethodDeclaration::left",
                "int",
                "count",
                "Parameter::left",
                "Item",
                "item",
                "Parameter::right",
                "MethodDeclaration::right",
            ],
        ),
        (
            AstNode("A", [AstNode("B", [AstNode("C", [AstNode("d")])])]),
            ["A::left", "B::left", "C::left", "d", "C::right", "B::right", "A::right"],
        ),
        (
            AstNode(
                "ClassDeclaration",
                [
                    AstNode("Shop"),
                    AstNode("MethodDeclaration", [AstNode("void"), AstNode("run")]),
                    AstNode("FieldDeclaration", [AstNode("int"), AstNode("size")]),
                ],
            ),
            [
                "ClassDeclaration::left",
                "Shop",
                "MethodDeclaration::left",
                "void",
                "run",
                "MethodDeclaration::right",
                "FieldDeclaration::left",
                "int",
                "size",
                "FieldDeclaration::right",
                "ClassDeclaration::right",
            ],
        ),
    ]
    for tree, expected in goldens:
        assert flatten_ast(tree) == expected


def test_planted_cliques_recovered_and_bridge_overlaps():
    start = time.perf_counter()
    edges = bridged_clique_edges(5, 3)
    a = adjacency_from_edges(11, edges)
    res = train_nocd(
        planted_features(edges, 11), a, 2, planted_train_config(0), hidden=PLANTED_HIDDEN
    )
    m = normalize_memberships(res.membership)
    labels = np.argmax(m.values, axis=1)
    assert len(set(labels[:5].tolist())) == 1
    assert len(set(labels[5:10].tolist())) == 1
    assert labels[0] != labels[5]
    d = threshold_assign(m, 0.2)
    assert sum(1 for svc in d.services if 10 in svc) == 2
    assert time.perf_counter() - start < 30.0


def test_soft_thresholding_beats_hard_argmax_on_icp():
    edges = bridged_clique_edges(5, 3)
    project = planted_project(edges, 11)
    a = adjacency_from_edges(11, edges)
    feats = planted_features(edges, 11)
    wins = 0
    for seed in range(10):
        res = train_nocd(
            feats, a, 2, planted_train_config(seed), hidden=PLANTED_HIDDEN
        )
        m = normalize_memberships(res.membership)
        soft = metric_icp(threshold_assign(m, 0.2), project)
        hard = metric_icp(hard_assign(m), project)
        if soft < hard:
            wins += 1
    assert wins >= 9


def test_metrics_match_brute_force_enumeration():
    rng = np.random.default_rng(99)
    for _ in range(200):
        project, d = random_metric_instance(rng)
        got = score_decomposition(d, project)
        assert (got.sm, got.icp, got.ifn, got.ned) == brute_force_metrics(project, d)

    def sized(sizes):
        services, base = [], 0
        for s in sizes:
            services.append(list(range(base, base + s)))
            base += s
        return Decomposition(services=services, outliers=[])

    assert metric_ned(sized([5, 10, 20])) == 0.0
    assert metric_ned(sized([3, 10])) == pytest.approx(0.2308, abs=5e-5)
    assert metric_ned(sized([21, 4])) == 1.0


def test_raising_tau_only_shrinks_services():
    rng = np.random.default_rng(7)
    for _ in range(100):
        check_tau_monotone(rng)


def test_pipeline_reruns_are_bit_identical(tmp_path):
    def config(out):
        return PipelineConfig(
            output_dir=str(out),
            project_root=str(TOYSHOP),
            use_tfidf=True,
            grid=SweepGrid(
                alphas=[0.0, 0.5, 1.0], taus=[0.2, 0.4], cluster_counts=[2], seeds=[0]
            ),
            train=planted_train_config(0),
        )

    start = time.perf_counter()
    first = run_pipeline(config(tmp_path / "one"))
    second = run_pipeline(config(tmp_path / "two"))
    elapsed = time.perf_counter() - start
    for name in ("decomposition.json", "report.json"):
        assert (first.out_dir / name).read_bytes() == (second.out_dir / name).read_bytes()
    assert elapsed / 2 < 60.0


def test_sweep_selects_recovering_cell_and_degenerate_qscore_is_zero():
    edges = bridged_clique_edges(5, 3)
    project = planted_project(edges, 11)
    s = structural_matrix(call_counts(project))
    f_str = FeatureMatrix(rows=s.values.copy(), kind="structural-as-features")
    f_sem = FeatureMatrix(rows=s.values.copy(), kind="tfidf")
    grid = SweepGrid(
        alphas=[0.0, 0.5, 1.0], taus=[0.1, 0.2, 0.4], cluster_counts=[2], seeds=[0]
    )
    res = run_sweep(project, f_sem, f_str, grid, planted_train_config(0))
    covers = [set(svc) for svc in res.best.decomposition.services]
    assert len(covers) == 2
    assert any(set(range(5)) <= c for c in covers)
    assert any(set(range(5, 10)) <= c for c in covers)

    single = SweepGrid(alphas=[0.5], taus=[0.2], cluster_counts=[2], seeds=[0])
    lone = run_sweep(project, f_sem, f_str, single, planted_train_config(0))
    assert lone.best.report.qscore == 0.0
