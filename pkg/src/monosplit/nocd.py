"""Graph-convolutional soft clustering of classes.

A two-layer graph convolutional network maps node features through the
degree-normalized adjacency into a nonnegative class-by-cluster
membership matrix. Training minimizes the negative log-likelihood of an
edge model in which the probability of observing an edge (i, j) is
1 - exp(-<M_i, M_j>): observed edges push member rows together,
sampled non-edges push them apart.

Everything here is plain float64 numpy with an explicit backward pass,
so gradients can be verified against finite differences and training is
bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .semantic import FeatureMatrix
from .structural import AdjacencyMatrix

log = logging.getLogger(__name__)

LOSS_EPS = 1e-10  # clamp for edge inner products inside the log


class TrainingError(Exception):
    """Raised when training cannot proceed (no edges, non-finite loss)."""


@dataclass
class NormalizedAdjacency:
    """Degree-normalized adjacency with self-loops added, so isolated
    nodes keep a unit self-entry instead of a zero row."""

    matrix: np.ndarray


@dataclass
class GcnParams:
    w1: np.ndarray  # (d, h)
    w2: np.ndarray  # (h, n_clusters)

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def copy(self) -> "GcnParams":
        return GcnParams(self.w1.copy(), self.w2.copy())


@dataclass
class MembershipMatrix:
    values: np.ndarray  # (Y, N) nonnegative
    kind: str  # "structural" | "semantic" | "fused"

    @property
    def n_classes(self) -> int:
        return self.values.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.values.shape[1]


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    l2_coefficient: float = 1e-5
    dropout: float = 0.5
    max_epochs: int = 500
    patience: int = 10
    negative_sample_ratio: float = 1.0
    validation_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not (0 < self.validation_fraction <= 0.5):
            raise ValueError("validation_fraction must be in (0, 0.5]")
        if not (0 <= self.dropout < 1):
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "l2_coefficient": self.l2_coefficient,
            "dropout": self.dropout,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "negative_sample_ratio": self.negative_sample_ratio,
            "validation_fraction": self.validation_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


@dataclass
class EdgeSplit:
    """Held-out edges/non-edges for early stopping; injectable for
    reproducibility experiments."""

    train_edges: list[tuple[int, int]]
    val_edges: list[tuple[int, int]]
    val_negatives: list[tuple[int, int]]


@dataclass
class ForwardState:
    """Intermediates of one forward pass, kept for the backward pass."""

    x: np.ndarray
    atilde: np.ndarray
    ax: np.ndarray          # atilde @ x
    h1_pre: np.ndarray      # ax @ w1
    h1: np.ndarray          # relu(h1_pre), dropout applied if mask given
    ah1: np.ndarray         # atilde @ h1
    m_pre: np.ndarray       # ah1 @ w2
    m: np.ndarray           # relu(m_pre)
    dropout_scale: np.ndarray | None  # mask / keep_prob, None at inference


@dataclass
class TrainResult:
    membership: MembershipMatrix
    epochs_ran: int
    best_epoch: int
    best_val_loss: float
    train_losses: list[float] = field(default_factory=list)


def normalize_adjacency(a: AdjacencyMatrix) -> NormalizedAdjacency:
    """D^{-1/2} (A + I) D^{-1/2} with D the degree diagonal of A + I."""
    if a.n_edges == 0:
        raise TrainingError("adjacency has no edges; cannot train NOCD")
    a_hat = a.entries.astype(np.float64) + np.eye(a.n_classes)
    inv_sqrt_deg = 1.0 / np.sqrt(a_hat.sum(axis=1))
    matrix = a_hat * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]
    return NormalizedAdjacency(matrix=matrix)


def init_params(d: int, n_clusters: int, hidden: int, rng: np.random.Generator) -> GcnParams:
    """Uniform Glorot initialization, seeded."""
    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return GcnParams(w1=glorot(d, hidden), w2=glorot(hidden, n_clusters))


def forward_pass(
    atilde: NormalizedAdjacency,
    x: np.ndarray,
    params: GcnParams,
    dropout_mask: np.ndarray | None = None,
    keep_prob: float = 1.0,
) -> ForwardState:
    if x.shape[1] != params.w1.shape[0]:
        raise ValueError(
            f"feature dim {x.shape[1]} does not match W1 fan-in {params.w1.shape[0]}"
        )
    a = atilde.matrix
    ax = a @ x
    h1_pre = ax @ params.w1
    h1 = np.maximum(h1_pre, 0.0)
    dropout_scale = None
    if dropout_mask is not None:
        dropout_scale = dropout_mask / keep_prob
        h1 = h1 * dropout_scale
    ah1 = a @ h1
    m_pre = ah1 @ params.w2
    m = np.maximum(m_pre, 0.0)
    return ForwardState(
        x=x, atilde=a, ax=ax, h1_pre=h1_pre, h1=h1, ah1=ah1,
        m_pre=m_pre, m=m, dropout_scale=dropout_scale,
    )


def gcn_forward(
    atilde: NormalizedAdjacency,
    x: FeatureMatrix,
    params: GcnParams,
    dropout_mask: np.ndarray | None = None,
    keep_prob: float = 1.0,
) -> MembershipMatrix:
    state = forward_pass(atilde, x.rows, params, dropout_mask, keep_prob)
    return MembershipMatrix(values=state.m, kind=_membership_kind(x.kind))


def _membership_kind(feature_kind: str) -> str:
    return "structural" if feature_kind == "structural-as-features" else "semantic"


def _check_pairs(pairs: list[tuple[int, int]], y: int, label: str) -> np.ndarray:
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.min() < 0 or arr.max() >= y:
        raise ValueError(f"{label} pair index out of range [0, {y})")
    return arr


def bp_loss(
    m: np.ndarray | MembershipMatrix,
    edges: list[tuple[int, int]],
    negatives: list[tuple[int, int]],
) -> float:
    """Edge-model negative log-likelihood.

    -sum over edges of log(1 - exp(-s)) plus sum over non-edges of s,
    where s is the membership inner product, clamped below at LOSS_EPS
    inside the log so empty memberships yield a large finite loss.
    """
    values = m.values if isinstance(m, MembershipMatrix) else m
    y = values.shape[0]
    e = _check_pairs(edges, y, "edge")
    n = _check_pairs(negatives, y, "negative")
    loss = 0.0
    if len(e):
        s = np.einsum("ij,ij->i", values[e[:, 0]], values[e[:, 1]])
        s = np.maximum(s, LOSS_EPS)
        loss -= np.log(-np.expm1(-s)).sum()
    if len(n):
        loss += np.einsum("ij,ij->i", values[n[:, 0]], values[n[:, 1]]).sum()
    return float(loss)


def _membership_grad(
    values: np.ndarray,
    edges: np.ndarray,
    negatives: np.ndarray,
) -> np.ndarray:
    """d(bp_loss)/dM. The clamp is honored exactly: pairs whose inner
    product sits below LOSS_EPS contribute zero edge gradient, matching
    finite differences of the implemented loss."""
    grad = np.zeros_like(values)
    if len(edges):
        mi = values[edges[:, 0]]
        mj = values[edges[:, 1]]
        s = np.einsum("ij,ij->i", mi, mj)
        active = s > LOSS_EPS
        coef = np.zeros_like(s)
        sa = s[active]
        coef[active] = -np.exp(-sa) / (-np.expm1(-sa))
        np.add.at(grad, edges[:, 0], coef[:, None] * mj)
        np.add.at(grad, edges[:, 1], coef[:, None] * mi)
    if len(negatives):
        np.add.at(grad, negatives[:, 0], values[negatives[:, 1]])
        np.add.at(grad, negatives[:, 1], values[negatives[:, 0]])
    return grad


def bp_loss_gradient(
    state: ForwardState,
    edges: list[tuple[int, int]],
    negatives: list[tuple[int, int]],
    params: GcnParams,
    l2_coefficient: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of bp_loss (+ l2_coefficient * ||W||^2) w.r.t. W1, W2,
    backpropagated through both ReLU layers and the normalized adjacency
    of the cached forward pass."""
    y = state.m.shape[0]
    e = _check_pairs(edges, y, "edge")
    n = _check_pairs(negatives, y, "negative")
    dm = _membership_grad(state.m, e, n)
    dm_pre = dm * (state.m_pre > 0)
    dw2 = state.ah1.T @ dm_pre
    dh1 = state.atilde @ dm_pre @ params.w2.T
    if state.dropout_scale is not None:
        dh1 = dh1 * state.dropout_scale
    dh1_pre = dh1 * (state.h1_pre > 0)
    dw1 = state.ax.T @ dh1_pre
    if l2_coefficient:
        dw1 = dw1 + 2.0 * l2_coefficient * params.w1
        dw2 = dw2 + 2.0 * l2_coefficient * params.w2
    return dw1, dw2


def non_edge_pairs(a: AdjacencyMatrix) -> list[tuple[int, int]]:
    """All unordered non-adjacent pairs (i < j), lexicographic."""
    mask = np.triu(np.ones_like(a.entries), k=1) * (a.entries == 0)
    ii, jj = np.nonzero(mask)
    return list(zip(ii.tolist(), jj.tolist()))


def sample_negatives(
    a: AdjacencyMatrix, count: int, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """`count` distinct unordered non-edges, uniform given the generator
    state. Asking for more than exist returns all of them with a warning
    (and consumes no randomness)."""
    pool = non_edge_pairs(a)
    if count >= len(pool):
        if count > len(pool):
            log.warning(
                "requested %d negatives but only %d non-edges exist; using all",
                count, len(pool),
            )
        return pool
    idx = rng.choice(len(pool), size=count, replace=False)
    return [pool[i] for i in sorted(idx.tolist())]


class _Adam:
    def __init__(self, shapes, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_edge_split(
    a: AdjacencyMatrix, validation_fraction: float, rng: np.random.Generator
) -> EdgeSplit:
    """Hold out a fraction of edges plus an equal-size fixed negative
    sample for early stopping."""
    edges = a.edge_list()
    if len(edges) < 2:
        return EdgeSplit(train_edges=edges, val_edges=[], val_negatives=[])
    n_val = int(round(validation_fraction * len(edges)))
    n_val = min(max(n_val, 1), len(edges) - 1)
    order = rng.permutation(len(edges))
    val_edges = [edges[i] for i in sorted(order[:n_val].tolist())]
    train_edges = [edges[i] for i in sorted(order[n_val:].tolist())]
    val_negatives = sample_negatives(a, n_val, rng)
    return EdgeSplit(train_edges=train_edges, val_edges=val_edges, val_negatives=val_negatives)


def train_nocd(
    x: FeatureMatrix,
    a: AdjacencyMatrix,
    n_clusters: int,
    cfg: TrainConfig,
    hidden: int = 128,
    split: EdgeSplit | None = None,
) -> TrainResult:
    """Train the soft-clustering network and return the membership matrix
    from the best-validation epoch, evaluated with dropout off.

    Each epoch uses all training edges with a freshly sampled negative
    set of size negative_sample_ratio * |train edges|. Identical config
    and seed give a bit-identical result.
    """
    if n_clusters < 1:
        raise ValueError("n_clusters must be >= 1")
    if x.n_classes != a.n_classes:
        raise ValueError(
            f"features have {x.n_classes} rows but adjacency is {a.n_classes}x{a.n_classes}"
        )
    atilde = normalize_adjacency(a)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(x.d, n_clusters, hidden, rng)
    if split is None:
        split = make_edge_split(a, cfg.validation_fraction, rng)
    n_neg = int(round(cfg.negative_sample_ratio * len(split.train_edges)))
    keep_prob = 1.0 - cfg.dropout
    y = x.n_classes

    best_params = params.copy()
    best_val = np.inf
    best_epoch = 0
    epochs_without_improvement = 0
    train_losses: list[float] = []
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        negatives = sample_negatives(a, n_neg, rng)
        mask = None
        if cfg.dropout > 0:
            mask = (rng.random((y, params.hidden)) < keep_prob).astype(np.float64)
        state = forward_pass(atilde, x.rows, params, mask, keep_prob)
        data_loss = bp_loss(state.m, split.train_edges, negatives)
        total_loss = data_loss + cfg.l2_coefficient * (
            float((params.w1 ** 2).sum()) + float((params.w2 ** 2).sum())
        )
        if not np.isfinite(total_loss):
            raise TrainingError(
                f"non-finite training loss at epoch {epoch}: data={data_loss!r}, "
                f"|W1|={np.abs(params.w1).max()!r}, |W2|={np.abs(params.w2).max()!r}"
            )
        train_losses.append(total_loss)
        dw1, dw2 = bp_loss_gradient(
            state, split.train_edges, negatives, params, cfg.l2_coefficient
        )
        if epoch == 1:
            adam = _Adam([params.w1.shape, params.w2.shape], cfg.learning_rate)
        adam.step([params.w1, params.w2], [dw1, dw2])

        if split.val_edges:
            eval_state = forward_pass(atilde, x.rows, params)
            val_loss = bp_loss(eval_state.m, split.val_edges, split.val_negatives)
        else:
            val_loss = total_loss
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            best_epoch = epoch
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= cfg.patience:
                break

    final_state = forward_pass(atilde, x.rows, best_params)
    membership = MembershipMatrix(values=final_state.m, kind=_membership_kind(x.kind))
    return TrainResult(
        membership=membership,
        epochs_ran=epoch,
        best_epoch=best_epoch,
        best_val_loss=float(best_val),
        train_losses=train_losses,
    )
