"""GCN soft clustering: normalization, forward/backward, sampling, training."""

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    PLANTED_HIDDEN,
    adjacency_from_edges,
    bridged_clique_edges,
    fd_gradient_check,
    planted_project,
    planted_train_config,
    two_clique_edges,
)
from monosplit.decompose import normalize_memberships, threshold_assign
from monosplit.nocd import (
    LOSS_EPS,
    EdgeSplit,
    GcnParams,
    MembershipMatrix,
    TrainConfig,
    TrainingError,
    _membership_grad,
    bp_loss,
    bp_loss_gradient,
    forward_pass,
    gcn_forward,
    init_params,
    make_edge_split,
    non_edge_pairs,
    normalize_adjacency,
    sample_negatives,
    train_nocd,
)
from monosplit.semantic import FeatureMatrix
from monosplit.structural import AdjacencyMatrix, call_counts, structural_matrix


def structural_features(edges, y):
    s = structural_matrix(call_counts(planted_project(edges, y)))
    return FeatureMatrix(rows=s.values.copy(), kind="structural-as-features")


def random_adjacency(rng, y, density=0.4):
    pairs = [(i, j) for i in range(y) for j in range(i + 1, y)]
    edges = [p for p in pairs if rng.random() < density]
    if not edges:
        edges = [pairs[0]]
    return adjacency_from_edges(y, edges)


# ---------------------------------------------------------------- adjacency


def test_normalize_two_node_single_edge():
    atilde = normalize_adjacency(adjacency_from_edges(2, [(0, 1)]))
    assert np.allclose(atilde.matrix, 0.5, atol=1e-15)


def test_normalize_isolated_node_keeps_unit_self_loop():
    atilde = normalize_adjacency(adjacency_from_edges(3, [(0, 1)]))
    assert atilde.matrix[2, 2] == pytest.approx(1.0, abs=1e-15)
    assert atilde.matrix[2, 0] == 0.0
    assert atilde.matrix[2, 1] == 0.0


def test_normalize_matches_scalar_oracle():
    rng = np.random.default_rng(12)
    for _ in range(25):
        a = random_adjacency(rng, 12)
        got = normalize_adjacency(a).matrix
        a_hat = a.entries.astype(float) + np.eye(12)
        deg = a_hat.sum(axis=1)
        expected = np.zeros((12, 12))
        for i in range(12):
            for j in range(12):
                expected[i, j] = a_hat[i, j] / math.sqrt(deg[i] * deg[j])
        assert np.abs(got - expected).max() < 1e-12


def test_normalize_output_symmetric_nonnegative():
    rng = np.random.default_rng(3)
    for _ in range(10):
        m = normalize_adjacency(random_adjacency(rng, 9)).matrix
        assert np.abs(m - m.T).max() == 0.0
        assert m.min() >= 0.0


def test_normalize_rejects_empty_graph():
    a = AdjacencyMatrix(entries=np.zeros((4, 4), dtype=np.int64))
    with pytest.raises(TrainingError, match="adjacency has no edges; cannot train NOCD"):
        normalize_adjacency(a)


# ------------------------------------------------------------------ forward


def scalar_forward(atilde, x, w1, w2):
    # independent loop implementation of relu(A relu(A X W1) W2)
    y, d = len(x), len(x[0])
    h = len(w1[0])
    n = len(w2[0])
    ax = [[sum(atilde[i][k] * x[k][j] for k in range(y)) for j in range(d)] for i in range(y)]
    h1 = [
        [max(0.0, sum(ax[i][k] * w1[k][j] for k in range(d))) for j in range(h)]
        for i in range(y)
    ]
    ah1 = [[sum(atilde[i][k] * h1[k][j] for k in range(y)) for j in range(h)] for i in range(y)]
    return [
        [max(0.0, sum(ah1[i][k] * w2[k][j] for k in range(h))) for j in range(n)]
        for i in range(y)
    ]


def test_forward_matches_scalar_oracle():
    rng = np.random.default_rng(41)
    for _ in range(5):
        a = random_adjacency(rng, 6)
        atilde = normalize_adjacency(a)
        x = rng.normal(size=(6, 4))
        params = GcnParams(w1=rng.normal(size=(4, 3)), w2=rng.normal(size=(3, 2)))
        got = forward_pass(atilde, x, params).m
        expected = np.array(scalar_forward(atilde.matrix.tolist(), x.tolist(),
                                           params.w1.tolist(), params.w2.tolist()))
        assert np.abs(got - expected).max() < 1e-10


def test_forward_zero_weights_give_zero_membership():
    atilde = normalize_adjacency(adjacency_from_edges(3, [(0, 1), (1, 2)]))
    x = np.ones((3, 2))
    params = GcnParams(w1=np.zeros((2, 4)), w2=np.zeros((4, 2)))
    assert not forward_pass(atilde, x, params).m.any()


def test_forward_negative_preactivations_clamp_to_zero():
    atilde = normalize_adjacency(adjacency_from_edges(3, [(0, 1), (1, 2)]))
    x = np.ones((3, 2))
    params = GcnParams(w1=np.ones((2, 4)), w2=-np.ones((4, 2)))
    state = forward_pass(atilde, x, params)
    assert state.m_pre.max() < 0
    assert not state.m.any()


def test_forward_dimension_mismatch():
    atilde = normalize_adjacency(adjacency_from_edges(3, [(0, 1)]))
    params = GcnParams(w1=np.zeros((5, 4)), w2=np.zeros((4, 2)))
    with pytest.raises(ValueError, match="feature dim 2 does not match W1 fan-in 5"):
        forward_pass(atilde, np.ones((3, 2)), params)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_forward_outputs_nonnegative(seed):
    rng = np.random.default_rng(seed)
    y = int(rng.integers(2, 8))
    a = random_adjacency(rng, y)
    atilde = normalize_adjacency(a)
    d, h, n = (int(rng.integers(1, 6)) for _ in range(3))
    x = rng.normal(size=(y, d))
    params = GcnParams(w1=rng.normal(size=(d, h)), w2=rng.normal(size=(h, n)))
    assert forward_pass(atilde, x, params).m.min() >= 0.0


def test_gcn_forward_kind_mapping():
    atilde = normalize_adjacency(adjacency_from_edges(2, [(0, 1)]))
    params = init_params(2, 2, 4, np.random.default_rng(0))
    x_str = FeatureMatrix(rows=np.ones((2, 2)), kind="structural-as-features")
    x_sem = FeatureMatrix(rows=np.ones((2, 2)), kind="tfidf")
    assert gcn_forward(atilde, x_str, params).kind == "structural"
    assert gcn_forward(atilde, x_sem, params).kind == "semantic"


# --------------------------------------------------------------------- loss


def test_bp_loss_single_edge_ln2():
    m = np.array([[math.log(2.0)], [1.0]])
    assert bp_loss(m, [(0, 1)], []) == pytest.approx(math.log(2.0), abs=1e-12)


def test_bp_loss_single_negative_is_inner_product():
    m = np.array([[0.3], [1.0]])
    assert bp_loss(m, [], [(0, 1)]) == 0.3


def test_bp_loss_zero_membership_clamps_finite():
    m = np.zeros((2, 3))
    loss = bp_loss(m, [(0, 1)], [])
    assert loss == pytest.approx(-math.log(-math.expm1(-LOSS_EPS)), rel=1e-12)
    assert loss == pytest.approx(23.0259, abs=1e-3)


def test_bp_loss_mixed_terms_add():
    m = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    loss = bp_loss(m, [(0, 1)], [(0, 2)])
    assert loss == pytest.approx(-math.log(-math.expm1(-1.0)) + 0.0, abs=1e-12)


def test_bp_loss_accepts_wrapper_and_raw():
    m = np.random.default_rng(0).uniform(size=(4, 2))
    wrapped = MembershipMatrix(values=m, kind="structural")
    assert bp_loss(wrapped, [(0, 1)], [(2, 3)]) == bp_loss(m, [(0, 1)], [(2, 3)])


def test_bp_loss_index_out_of_range():
    m = np.ones((3, 2))
    with pytest.raises(ValueError, match=r"edge pair index out of range \[0, 3\)"):
        bp_loss(m, [(0, 3)], [])
    with pytest.raises(ValueError, match="negative pair index out of range"):
        bp_loss(m, [], [(-1, 2)])


# ---------------------------------------------------------------- gradients


def test_gradient_zero_without_pairs():
    atilde = normalize_adjacency(adjacency_from_edges(3, [(0, 1)]))
    params = init_params(2, 2, 4, np.random.default_rng(1))
    state = forward_pass(atilde, np.ones((3, 2)), params)
    dw1, dw2 = bp_loss_gradient(state, [], [], params)
    assert not dw1.any() and not dw2.any()


def test_membership_grad_single_negative_is_partner_row():
    m = np.array([[0.2, 0.7], [0.5, 0.1], [0.9, 0.9]])
    pairs = np.array([[0, 1]])
    grad = _membership_grad(m, np.zeros((0, 2), dtype=int), pairs)
    assert np.array_equal(grad[0], m[1])
    assert np.array_equal(grad[1], m[0])
    assert not grad[2].any()


def test_membership_grad_single_edge_formula():
    m = np.array([[0.8, 0.1], [0.3, 0.6]])
    s = float(m[0] @ m[1])
    coef = -math.exp(-s) / (1.0 - math.exp(-s))
    grad = _membership_grad(m, np.array([[0, 1]]), np.zeros((0, 2), dtype=int))
    assert np.allclose(grad[0], coef * m[1], atol=1e-14)
    assert np.allclose(grad[1], coef * m[0], atol=1e-14)


def test_clamped_edge_pairs_contribute_no_gradient():
    # inner product 0 <= LOSS_EPS: the loss is flat there, so is the gradient
    m = np.array([[1.0, 0.0], [0.0, 0.0]])
    grad = _membership_grad(m, np.array([[0, 1]]), np.zeros((0, 2), dtype=int))
    assert not grad.any()


def test_l2_term_adds_linear_gradient():
    atilde = normalize_adjacency(adjacency_from_edges(3, [(0, 1), (1, 2)]))
    rng = np.random.default_rng(5)
    params = GcnParams(w1=rng.normal(size=(2, 4)), w2=rng.normal(size=(4, 2)))
    state = forward_pass(atilde, rng.uniform(size=(3, 2)), params)
    plain = bp_loss_gradient(state, [(0, 1)], [(0, 2)], params, 0.0)
    with_l2 = bp_loss_gradient(state, [(0, 1)], [(0, 2)], params, 1e-3)
    assert np.allclose(with_l2[0] - plain[0], 2e-3 * params.w1, atol=1e-15)
    assert np.allclose(with_l2[1] - plain[1], 2e-3 * params.w2, atol=1e-15)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(19)
    for _ in range(8):
        assert fd_gradient_check(rng) < 1e-4


# ----------------------------------------------------------------- sampling


def test_sample_negatives_complete_graph_warns_empty(caplog):
    a = adjacency_from_edges(3, [(0, 1), (0, 2), (1, 2)])
    with caplog.at_level(logging.WARNING, logger="monosplit.nocd"):
        out = sample_negatives(a, 2, np.random.default_rng(0))
    assert out == []
    assert "only 0 non-edges exist" in caplog.text


def test_sample_negatives_exhaustive_exact_set():
    a = adjacency_from_edges(4, [(0, 1), (1, 2), (2, 3)])
    out = sample_negatives(a, 3, np.random.default_rng(0))
    assert out == [(0, 2), (0, 3), (1, 3)]


def test_sample_negatives_overflow_returns_all_with_warning(caplog):
    a = adjacency_from_edges(4, [(0, 1), (1, 2), (2, 3)])
    with caplog.at_level(logging.WARNING, logger="monosplit.nocd"):
        out = sample_negatives(a, 50, np.random.default_rng(0))
    assert out == [(0, 2), (0, 3), (1, 3)]
    assert "requested 50 negatives but only 3 non-edges exist; using all" in caplog.text


def test_sample_negatives_deterministic_per_seed():
    rng = np.random.default_rng(77)
    a = random_adjacency(rng, 10)
    first = sample_negatives(a, 5, np.random.default_rng(123))
    second = sample_negatives(a, 5, np.random.default_rng(123))
    assert first == second
    assert first != sample_negatives(a, 5, np.random.default_rng(124))


def test_sample_negatives_subset_properties():
    rng = np.random.default_rng(8)
    a = random_adjacency(rng, 10)
    pool = set(non_edge_pairs(a))
    out = sample_negatives(a, 6, np.random.default_rng(0))
    assert len(out) == 6
    assert len(set(out)) == 6
    assert set(out) <= pool
    assert out == sorted(out)


def test_sample_negatives_full_request_draws_no_randomness():
    # the all-non-edges path must leave the generator untouched, so a
    # permuted training run can reuse the same stream
    a = adjacency_from_edges(4, [(0, 1), (1, 2), (2, 3)])
    used = np.random.default_rng(9)
    sample_negatives(a, 3, used)
    assert used.random() == np.random.default_rng(9).random()


# -------------------------------------------------------------- edge splits


def test_edge_split_partitions_edges():
    rng = np.random.default_rng(2)
    a = random_adjacency(rng, 12, density=0.5)
    edges = a.edge_list()
    split = make_edge_split(a, 0.2, np.random.default_rng(0))
    assert sorted(split.train_edges + split.val_edges) == edges
    assert not set(split.train_edges) & set(split.val_edges)
    assert len(split.val_edges) == min(max(round(0.2 * len(edges)), 1), len(edges) - 1)
    assert len(split.val_negatives) == len(split.val_edges)


def test_edge_split_single_edge_skips_validation():
    split = make_edge_split(adjacency_from_edges(2, [(0, 1)]), 0.2, np.random.default_rng(0))
    assert split.train_edges == [(0, 1)]
    assert split.val_edges == []
    assert split.val_negatives == []


def test_edge_split_negatives_are_non_edges():
    rng = np.random.default_rng(4)
    a = random_adjacency(rng, 10, density=0.5)
    split = make_edge_split(a, 0.3, np.random.default_rng(1))
    assert set(split.val_negatives) <= set(non_edge_pairs(a))


# ----------------------------------------------------------------- training


def test_train_config_validation():
    with pytest.raises(ValueError, match="patience"):
        TrainConfig(patience=0)
    with pytest.raises(ValueError, match="validation_fraction"):
        TrainConfig(validation_fraction=0.6)
    with pytest.raises(ValueError, match="validation_fraction"):
        TrainConfig(validation_fraction=0.0)
    with pytest.raises(ValueError, match="dropout"):
        TrainConfig(dropout=1.0)


def test_train_config_dict_roundtrip():
    cfg = TrainConfig(learning_rate=5e-3, dropout=0.25, seed=9)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_train_loss_descends_on_planted_graph():
    edges = two_clique_edges(5)
    a = adjacency_from_edges(10, edges)
    res = train_nocd(structural_features(edges, 10), a, 2,
                     planted_train_config(0), hidden=PLANTED_HIDDEN)
    assert len(res.train_losses) >= 10
    assert res.train_losses[9] < res.train_losses[0]


def test_train_bit_deterministic_per_seed():
    edges = two_clique_edges(4)
    a = adjacency_from_edges(8, edges)
    feats = structural_features(edges, 8)
    cfg = TrainConfig(seed=11, max_epochs=40)
    first = train_nocd(feats, a, 2, cfg, hidden=16)
    second = train_nocd(feats, a, 2, cfg, hidden=16)
    assert np.array_equal(first.membership.values, second.membership.values)
    assert first.train_losses == second.train_losses
    assert first.best_epoch == second.best_epoch


def test_train_recovers_planted_cliques():
    edges = two_clique_edges(5)
    a = adjacency_from_edges(10, edges)
    res = train_nocd(structural_features(edges, 10), a, 2,
                     planted_train_config(0), hidden=PLANTED_HIDDEN)
    labels = np.argmax(normalize_memberships(res.membership).values, axis=1)
    assert len(set(labels[:5])) == 1
    assert len(set(labels[5:])) == 1
    assert labels[0] != labels[5]


def test_train_bridge_node_joins_both_clusters():
    edges = bridged_clique_edges(5, 3)
    a = adjacency_from_edges(11, edges)
    res = train_nocd(structural_features(edges, 11), a, 2,
                     planted_train_config(0), hidden=PLANTED_HIDDEN)
    d = threshold_assign(normalize_memberships(res.membership), 0.2)
    holding_bridge = [svc for svc in d.services if 10 in svc]
    assert len(holding_bridge) == 2


def test_train_single_cluster_degenerate():
    edges = two_clique_edges(5)
    a = adjacency_from_edges(10, edges)
    res = train_nocd(structural_features(edges, 10), a, 1,
                     planted_train_config(0), hidden=PLANTED_HIDDEN)
    m = normalize_memberships(res.membership)
    d = threshold_assign(m, 0.5)
    assert d.services == [list(range(10))]
    assert not d.outliers


def test_train_shape_mismatch():
    a = adjacency_from_edges(4, [(0, 1)])
    feats = FeatureMatrix(rows=np.ones((3, 2)), kind="tfidf")
    with pytest.raises(ValueError, match="features have 3 rows but adjacency is 4x4"):
        train_nocd(feats, a, 2, TrainConfig())


def test_train_rejects_invalid_cluster_count():
    a = adjacency_from_edges(3, [(0, 1)])
    feats = FeatureMatrix(rows=np.ones((3, 2)), kind="tfidf")
    with pytest.raises(ValueError, match="n_clusters must be >= 1"):
        train_nocd(feats, a, 0, TrainConfig())


def test_train_propagates_empty_graph_error():
    a = AdjacencyMatrix(entries=np.zeros((3, 3), dtype=np.int64))
    feats = FeatureMatrix(rows=np.ones((3, 2)), kind="tfidf")
    with pytest.raises(TrainingError, match="adjacency has no edges"):
        train_nocd(feats, a, 2, TrainConfig())


def test_train_aborts_on_non_finite_loss():
    edges = two_clique_edges(3)
    a = adjacency_from_edges(6, edges)
    rows = np.ones((6, 3))
    rows[0, 0] = np.nan
    feats = FeatureMatrix(rows=rows, kind="tfidf")
    with pytest.raises(TrainingError, match="non-finite training loss at epoch 1"):
        train_nocd(feats, a, 2, TrainConfig(seed=0))


def test_train_reports_best_epoch_metadata():
    edges = two_clique_edges(4)
    a = adjacency_from_edges(8, edges)
    res = train_nocd(structural_features(edges, 8), a, 2, TrainConfig(seed=3, max_epochs=60))
    assert 1 <= res.best_epoch <= res.epochs_ran <= 60
    assert math.isfinite(res.best_val_loss)
    assert len(res.train_losses) == res.epochs_ran


def test_train_permutation_equivariance():
    # dropout off; the negative request exceeds the non-edge pool every
    # epoch, so sampling returns the full set and consumes no randomness.
    # With the split injected in permuted form both runs see the same
    # stream, and the GCN itself is permutation equivariant.
    edges = two_clique_edges(5)
    y = 10
    a = adjacency_from_edges(y, edges)
    feats = structural_features(edges, y)
    pool = non_edge_pairs(a)
    split = EdgeSplit(train_edges=edges[:-4], val_edges=edges[-4:],
                      val_negatives=pool[:4])
    cfg = TrainConfig(seed=0, dropout=0.0, negative_sample_ratio=1e6,
                      max_epochs=20, patience=30)
    base = train_nocd(feats, a, 2, cfg, hidden=16, split=split)

    perm = np.random.default_rng(3).permutation(y)

    def relabel(pairs):
        return [tuple(sorted((int(perm[i]), int(perm[j])))) for i, j in pairs]

    inv = np.argsort(perm)
    a_p = adjacency_from_edges(y, relabel(edges))
    feats_p = FeatureMatrix(rows=feats.rows[inv], kind=feats.kind)
    split_p = EdgeSplit(train_edges=relabel(split.train_edges),
                        val_edges=relabel(split.val_edges),
                        val_negatives=relabel(split.val_negatives))
    permuted = train_nocd(feats_p, a_p, 2, cfg, hidden=16, split=split_p)

    assert permuted.best_epoch == base.best_epoch
    diff = np.abs(permuted.membership.values[perm] - base.membership.values).max()
    assert diff < 1e-6
