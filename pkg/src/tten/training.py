"""BPR and sampled-softmax losses with hand-derived gradients, sparse Adam, training loop."""

from __future__ import annotations

import logging
import math
import weakref
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import InteractionDataset
from .evaluation import evaluate
from .graph import NormalizedAdjacency, build_norm_adjacency
from .model import EmbeddingModel, backward, forward, init_xavier

logger = logging.getLogger(__name__)

__all__ = [
    "AdamState",
    "EarlyStopper",
    "TrainConfig",
    "TrainReport",
    "adam_step",
    "bpr_loss_and_grad",
    "bpr_pair_loss",
    "in_batch_negatives",
    "sample_bpr_batch",
    "sample_ssm_batch",
    "ssm_loss_and_grad",
    "train",
]

DEFAULT_L2 = {"bpr": 1e-5, "ssm": 1e-7}


@dataclass
class TrainConfig:
    loss_kind: str = "ssm"
    learning_rate: float = 1e-3
    batch_size: int = 4096
    max_epochs: int = 300
    early_stop_min_epoch: int = 50
    patience: int = 5
    eval_every: int = 5
    temperature: float = 0.1
    l2_coeff: float | None = None  # None -> loss-specific default
    num_layers: int = 3
    dim: int = 64
    seed: int = 0
    p: float = 1.0
    k: int = 20

    def __post_init__(self):
        self.loss_kind = self.loss_kind.lower()
        if self.loss_kind not in DEFAULT_L2:
            raise ValueError(f"loss_kind must be 'bpr' or 'ssm', got {self.loss_kind!r}")
        if self.l2_coeff is None:
            self.l2_coeff = DEFAULT_L2[self.loss_kind]
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1 or (self.loss_kind == "ssm" and self.batch_size < 2):
            raise ValueError("batch_size too small")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.l2_coeff < 0:
            raise ValueError("l2_coeff must be >= 0")
        if self.patience < 1 or self.eval_every < 1 or self.max_epochs < 1:
            raise ValueError("patience, eval_every and max_epochs must be >= 1")
        if self.num_layers < 0 or self.dim < 1 or self.k < 1:
            raise ValueError("invalid num_layers/dim/k")


# -- sampling ----------------------------------------------------------------

class _PositivePool:
    """Flattened train pairs plus a sorted code table for membership tests."""

    def __init__(self, dataset: InteractionDataset):
        users, items = dataset.train_pairs()
        self.num_items = dataset.num_items
        self.codes = users * dataset.num_items + items  # user-major sorted
        lengths = np.array([len(x) for x in dataset.train], dtype=np.int64)
        ok = lengths[users] < dataset.num_items
        if not ok.all():
            logger.warning("%d users interact with every item; skipped for BPR", int(np.sum(lengths == dataset.num_items)))
        self.users, self.items = users, items
        self.bpr_users, self.bpr_items = users[ok], items[ok]

    def contains(self, users, items):
        codes = users * self.num_items + items
        pos = np.searchsorted(self.codes, codes)
        pos = np.minimum(pos, self.codes.size - 1)
        return self.codes[pos] == codes


_pools: "weakref.WeakKeyDictionary[InteractionDataset, _PositivePool]" = weakref.WeakKeyDictionary()


def _pool(dataset):
    pool = _pools.get(dataset)
    if pool is None:
        pool = _pools[dataset] = _PositivePool(dataset)
    return pool


def sample_bpr_batch(dataset: InteractionDataset, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """``(batch_size, 3)`` array of (user, positive, negative) triples.

    The (user, positive) pair is uniform over train interactions, the negative
    uniform over the user's non-interacted items (rejection sampling).
    """
    pool = _pool(dataset)
    if pool.bpr_users.size == 0:
        raise ValueError("no train interaction admits a negative sample")
    idx = rng.integers(0, pool.bpr_users.size, size=batch_size)
    users, pos = pool.bpr_users[idx], pool.bpr_items[idx]
    neg = rng.integers(0, dataset.num_items, size=batch_size)
    bad = pool.contains(users, neg)
    while bad.any():
        neg[bad] = rng.integers(0, dataset.num_items, size=int(bad.sum()))
        bad[bad] = pool.contains(users[bad], neg[bad])
    return np.stack([users, pos, neg], axis=1)


def sample_ssm_batch(dataset: InteractionDataset, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """``(batch_size, 2)`` array of (user, positive) pairs, uniform over train interactions.

    Negatives are implicit: each entry uses the positives of every other entry
    (see :func:`in_batch_negatives`).
    """
    if batch_size < 2:
        raise ValueError("in-batch negatives need batch_size >= 2")
    pool = _pool(dataset)
    if pool.users.size == 0:
        raise ValueError("dataset has no train interactions")
    idx = rng.integers(0, pool.users.size, size=batch_size)
    return np.stack([pool.users[idx], pool.items[idx]], axis=1)


def in_batch_negatives(batch: np.ndarray, entry: int) -> np.ndarray:
    return np.delete(batch[:, 1], entry)


# -- losses ------------------------------------------------------------------

def _l2(base, rows, l2, batch_size, grad):
    rows = np.unique(rows)
    sub = base[rows]
    grad[rows] += (2.0 * l2 / batch_size) * sub
    return l2 * float(np.sum(sub * sub)) / batch_size


def bpr_pair_loss(pos_scores, neg_scores) -> float:
    """Mean ``softplus(neg - pos)``, i.e. ``-ln sigmoid(pos - neg)`` without overflow."""
    diff = np.asarray(pos_scores, dtype=np.float64) - np.asarray(neg_scores, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, -diff)))


def bpr_loss_and_grad(model: EmbeddingModel, adj: NormalizedAdjacency, batch: np.ndarray, l2: float):
    """Mean ``-ln sigmoid(s_pos - s_neg)`` on final-embedding inner products, plus L2 on base rows."""
    batch = np.asarray(batch, dtype=np.int64)
    U = model.num_users
    B = batch.shape[0]
    final = forward(model, adj).final
    u, i, j = batch[:, 0], batch[:, 1] + U, batch[:, 2] + U
    eu, ei, ej = final[u], final[i], final[j]
    pos, neg = np.einsum("bd,bd->b", eu, ei), np.einsum("bd,bd->b", eu, ej)
    loss = bpr_pair_loss(pos, neg)
    diff = pos - neg
    # d/d diff of softplus(-diff) = -sigmoid(-diff)
    g = -0.5 * (1.0 - np.tanh(0.5 * diff)) / B
    grad_final = np.zeros_like(final)
    np.add.at(grad_final, u, g[:, None] * (ei - ej))
    np.add.at(grad_final, i, g[:, None] * eu)
    np.add.at(grad_final, j, -g[:, None] * eu)
    grad = backward(grad_final, adj, model.num_layers)
    if l2:
        loss += _l2(model.base, np.concatenate([u, i, j]), l2, B, grad)
    return loss, grad


def _unit(x):
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0.0
    inv = np.zeros_like(norms)
    inv[~zero] = 1.0 / norms[~zero]
    return x * inv[:, None], inv, int(zero.sum())


def ssm_loss_and_grad(model: EmbeddingModel, adj: NormalizedAdjacency, batch: np.ndarray,
                      temperature: float, l2: float):
    """Sampled softmax with cosine logits over in-batch negatives, plus L2 on base rows.

    Entry ``b`` scores its own positive against the positives of all other
    entries; duplicates are not filtered.  Zero-norm final rows get cosine 0.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    batch = np.asarray(batch, dtype=np.int64)
    U = model.num_users
    B = batch.shape[0]
    final = forward(model, adj).final
    u, i = batch[:, 0], batch[:, 1] + U
    xh, xinv, zx = _unit(final[u])
    yh, yinv, zy = _unit(final[i])
    if zx or zy:
        logger.warning("ssm: %d zero-norm embeddings in batch; cosine taken as 0", zx + zy)
    # in-place on the B x B block; it dominates the cost of a step
    logits = (xh * (1.0 / temperature)) @ yh.T
    positive = np.diagonal(logits).copy()
    shift = logits.max(axis=1)
    logits -= shift[:, None]
    probs = np.exp(logits, out=logits)
    denom = probs.sum(axis=1)
    loss = float(np.mean(np.log(denom) + shift - positive))

    probs *= (1.0 / (B * temperature)) / denom[:, None]
    probs[np.diag_indices(B)] -= 1.0 / (B * temperature)
    dxh = probs @ yh
    dyh = probs.T @ xh
    dx = (dxh - xh * np.einsum("bd,bd->b", xh, dxh)[:, None]) * xinv[:, None]
    dy = (dyh - yh * np.einsum("bd,bd->b", yh, dyh)[:, None]) * yinv[:, None]
    grad_final = np.zeros_like(final)
    np.add.at(grad_final, u, dx)
    np.add.at(grad_final, i, dy)
    grad = backward(grad_final, adj, model.num_layers)
    if l2:
        loss += _l2(model.base, np.concatenate([u, i]), l2, B, grad)
    return loss, grad


# -- optimizer ---------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, table: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(table), np.zeros_like(table))


def adam_step(table: np.ndarray, grad: np.ndarray, state: AdamState, lr: float):
    """Bias-corrected Adam on the rows with a nonzero gradient; returns new (table, state).

    Rows without gradient keep both their parameters and their moments.
    Inputs are not modified.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != table.shape:
        raise ValueError(f"gradient shape {grad.shape} != table shape {table.shape}")
    if not np.all(np.isfinite(grad)):
        bad = np.argwhere(~np.isfinite(grad))
        raise FloatingPointError(f"non-finite gradient at {len(bad)} entries, first at row/col {tuple(int(x) for x in bad[0])}")
    rows = np.flatnonzero(np.any(grad != 0.0, axis=1))
    t = state.t + 1
    m, v, table = state.m.copy(), state.v.copy(), table.copy()
    g = grad[rows]
    m[rows] = state.beta1 * m[rows] + (1.0 - state.beta1) * g
    v[rows] = state.beta2 * v[rows] + (1.0 - state.beta2) * g * g
    m_hat = m[rows] / (1.0 - state.beta1 ** t)
    v_hat = v[rows] / (1.0 - state.beta2 ** t)
    table[rows] -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return table, AdamState(m, v, t, state.beta1, state.beta2, state.eps)


# -- training loop -----------------------------------------------------------

class EarlyStopper:
    """Tracks the best validation score; stops after ``patience`` non-improving counted evaluations."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -math.inf
        self.best_epoch = None
        self.bad = 0

    def update(self, epoch: int, score: float, counts: bool = True) -> tuple:
        """Returns ``(improved, stop)``."""
        if score > self.best:
            self.best, self.best_epoch, self.bad = score, epoch, 0
            return True, False
        if counts:
            self.bad += 1
        return False, self.bad >= self.patience


@dataclass
class TrainReport:
    history: list = field(default_factory=list)  # dicts: epoch, recall, loss
    epoch_losses: list = field(default_factory=list)
    best_epoch: int = 0
    best_recall: float | None = None
    stop_reason: str = "max_epochs"
    zero_norm_warnings: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "epochs_run": len(self.epoch_losses),
            "epoch_losses": [float(x) for x in self.epoch_losses],
            "history": self.history,
            "best_epoch": self.best_epoch,
            "best_recall": self.best_recall,
            "stop_reason": self.stop_reason,
        }


def train(dataset: InteractionDataset, config: TrainConfig, callback=None, threads: int = 1):
    """Train LightGCN with Adam; returns ``(model at best validation recall, TrainReport)``.

    Validation Recall@k (TTEN with ``config.p``) is computed after epoch 1,
    every ``eval_every`` epochs and after the last epoch.  Only evaluations at
    or after ``early_stop_min_epoch`` count towards ``patience``.  Without
    validation data the model after the last epoch is returned.
    """
    if dataset.num_train == 0:
        raise ValueError("dataset has no train interactions")
    adj = build_norm_adjacency(dataset)
    model = init_xavier(dataset.num_users, dataset.num_items, config.dim, config.seed, config.num_layers)
    state = AdamState.zeros_like(model.base)
    rng = np.random.default_rng([config.seed, 1])
    n_batches = math.ceil(dataset.num_train / config.batch_size)
    has_validation = any(len(v) for v in dataset.validation)
    if not has_validation:
        logger.warning("empty validation split: early stopping disabled")

    report = TrainReport(config=asdict(config))
    stopper = EarlyStopper(config.patience)
    best_base = model.base.copy()
    for epoch in range(1, config.max_epochs + 1):
        losses = []
        for _ in range(n_batches):
            if config.loss_kind == "bpr":
                batch = sample_bpr_batch(dataset, config.batch_size, rng)
                loss, grad = bpr_loss_and_grad(model, adj, batch, config.l2_coeff)
            else:
                batch = sample_ssm_batch(dataset, config.batch_size, rng)
                loss, grad = ssm_loss_and_grad(model, adj, batch, config.temperature, config.l2_coeff)
            model.base, state = adam_step(model.base, grad, state, config.learning_rate)
            losses.append(loss)
        epoch_loss = float(np.mean(losses))
        report.epoch_losses.append(epoch_loss)
        due = epoch == 1 or epoch % config.eval_every == 0 or epoch == config.max_epochs
        entry = None
        if has_validation and due:
            final = forward(model, adj)
            recall = evaluate(final, dataset, k=config.k, p=config.p, split="validation",
                              threads=threads).recall
            entry = {"epoch": epoch, "recall": recall, "loss": epoch_loss}
            report.history.append(entry)
            improved, stop = stopper.update(epoch, recall, counts=epoch >= config.early_stop_min_epoch)
            if improved:
                best_base = model.base.copy()
            if stop:
                report.stop_reason = "early"
        if callback is not None:
            callback(epoch, epoch_loss, entry)
        if report.stop_reason == "early":
            break

    if has_validation:
        model.base = best_base
        report.best_epoch = stopper.best_epoch
        report.best_recall = stopper.best
    else:
        report.best_epoch = len(report.epoch_losses)
    return model, report
