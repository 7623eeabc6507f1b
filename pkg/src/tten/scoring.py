"""Test-time embedding normalization scores and masked top-k retrieval.

The relevance of item ``i`` for user ``u`` is

    e_u . e_i / (||e_u|| * ||e_i|| ** p)  =  cos(e_u, e_i) * ||e_i|| ** (1 - p)

so ``p = 0`` ranks like the inner product and ``p = 1`` like the cosine.  The
user norm only rescales a user's whole score row and never changes the ranking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RankedList", "item_scale", "recommend_topk", "score_matrix", "topk_rows", "tten_score"]


@dataclass(frozen=True, eq=False)
class RankedList:
    user: int
    items: np.ndarray
    scores: np.ndarray
    short: bool = False  # fewer than k unmasked items were available


def tten_score(e_u, e_i, p: float) -> float:
    e_u = np.asarray(e_u, dtype=np.float64)
    e_i = np.asarray(e_i, dtype=np.float64)
    if e_u.shape != e_i.shape:
        raise ValueError(f"dimension mismatch: {e_u.shape} vs {e_i.shape}")
    nu, ni = np.linalg.norm(e_u), np.linalg.norm(e_i)
    if nu == 0.0 or ni == 0.0:
        return 0.0
    return float(e_u @ e_i / (nu * ni ** p))


def item_scale(item_emb: np.ndarray, p: float) -> np.ndarray:
    """Per-item factor ``||e_i|| ** -p``; zero for zero-norm items."""
    norms = np.linalg.norm(item_emb, axis=1)
    out = np.zeros_like(norms)
    nz = norms > 0
    out[nz] = norms[nz] ** (-p)
    return out


def score_matrix(user_emb: np.ndarray, item_emb: np.ndarray, p: float) -> np.ndarray:
    """Dense TTEN scores, users x items, in double precision."""
    user_emb = np.asarray(user_emb, dtype=np.float64)
    item_emb = np.asarray(item_emb, dtype=np.float64)
    unorm = np.linalg.norm(user_emb, axis=1)
    uscale = np.zeros_like(unorm)
    uscale[unorm > 0] = 1.0 / unorm[unorm > 0]
    return (user_emb @ item_emb.T) * uscale[:, None] * item_scale(item_emb, p)[None, :]


def _topk_row(scores: np.ndarray, k: int):
    """Indices of the k largest finite scores, ties by ascending index."""
    valid = np.flatnonzero(scores > -np.inf)
    if valid.size <= k:
        cand = valid
    else:
        # every item scoring at least the k-th best value, so ties at the cut survive
        kth = np.partition(scores[valid], valid.size - k)[valid.size - k]
        cand = valid[scores[valid] >= kth]
    order = np.lexsort((cand, -scores[cand]))
    return cand[order[:k]]


def topk_rows(scores: np.ndarray, k: int) -> list:
    """Top-k item ids for every row of a (masked) score matrix."""
    return [_topk_row(row, k) for row in scores]


def recommend_topk(final, user: int, k: int, p: float, train_mask=None) -> RankedList:
    """Rank every item for one user by TTEN score, excluding ``train_mask`` item ids.

    ``final`` is anything exposing ``users`` and ``items`` embedding blocks
    (e.g. :class:`tten.model.FinalEmbeddings`).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= user < len(final.users):
        raise IndexError(f"user {user} out of range")
    scores = score_matrix(final.users[user][None, :], final.items, p)[0]
    if train_mask is not None and len(train_mask):
        scores[np.asarray(train_mask, dtype=np.int64)] = -np.inf
    items = _topk_row(scores, k)
    return RankedList(user, items, scores[items], short=items.size < k)
