"""Ranking metrics and popularity-bias analyses over trained embeddings."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import InteractionDataset, PopularityGroups, assign_groups
from .scoring import score_matrix, topk_rows

logger = logging.getLogger(__name__)

__all__ = [
    "CosineQuadrantStats",
    "EvalReport",
    "QUADRANTS",
    "cosine_quadrant_analysis",
    "evaluate",
    "group_frequency",
    "group_recall",
    "magnitude_popularity_correlation",
    "ndcg_at_k",
    "p_sweep",
    "recall_at_k",
    "topk_for_users",
]

USER_CHUNK = 256


def _items(ranked):
    return np.asarray(getattr(ranked, "items", ranked), dtype=np.int64)


def recall_at_k(ranked, test_items, k: int) -> float:
    """Fraction of ``test_items`` found in the first ``k`` ranked items."""
    test = set(int(i) for i in test_items)
    if not test:
        raise ValueError("empty test set")
    hits = sum(1 for i in _items(ranked)[:k] if int(i) in test)
    return hits / len(test)


def ndcg_at_k(ranked, test_items, k: int) -> float:
    """Binary-relevance NDCG with ``1/log2(rank+1)`` discount."""
    test = set(int(i) for i in test_items)
    if not test:
        raise ValueError("empty test set")
    dcg = sum(1.0 / math.log2(r + 2) for r, i in enumerate(_items(ranked)[:k]) if int(i) in test)
    idcg = sum(1.0 / math.log2(r + 2) for r in range(min(len(test), k)))
    return dcg / idcg


def _chunk_topk(final, dataset, users, k, p):
    scores = score_matrix(final.users[users], final.items, p)
    for row, u in enumerate(users):
        scores[row, dataset.train[u]] = -np.inf
    return topk_rows(scores, k)


def topk_for_users(final, dataset: InteractionDataset, users, k: int, p: float, threads: int = 1) -> list:
    """Top-k lists (train items masked) for ``users``, in the given order.

    Users are processed in fixed-size chunks, so the result does not depend
    on ``threads``.
    """
    users = np.asarray(users, dtype=np.int64)
    chunks = [users[s:s + USER_CHUNK] for s in range(0, users.size, USER_CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _chunk_topk(final, dataset, c, k, p), chunks))
    else:
        parts = [_chunk_topk(final, dataset, c, k, p) for c in chunks]
    return [lst for part in parts for lst in part]


def group_frequency(ranked_lists, groups: PopularityGroups) -> np.ndarray:
    """Share of all recommendation slots taken by each group (index 0 = group 1)."""
    counts = np.zeros(groups.num_groups, dtype=np.int64)
    for lst in ranked_lists:
        items = _items(lst)
        if items.size:
            counts += np.bincount(groups.assignment[items] - 1, minlength=groups.num_groups)
    total = counts.sum()
    return counts / total if total else np.zeros(groups.num_groups)


def group_recall(ranked_lists, test_sets, groups: PopularityGroups, k: int) -> np.ndarray:
    """Pooled per-group recall; NaN for a group with no test items at all."""
    hits = np.zeros(groups.num_groups, dtype=np.int64)
    totals = np.zeros(groups.num_groups, dtype=np.int64)
    G = groups.num_groups
    for lst, test in zip(ranked_lists, test_sets):
        test = np.asarray(test, dtype=np.int64)
        if test.size == 0:
            continue
        totals += np.bincount(groups.assignment[test] - 1, minlength=G)
        found = np.intersect1d(_items(lst)[:k], test)
        if found.size:
            hits += np.bincount(groups.assignment[found] - 1, minlength=G)
    out = np.full(G, np.nan)
    nz = totals > 0
    out[nz] = hits[nz] / totals[nz]
    return out


@dataclass
class EvalReport:
    recall: float
    ndcg: float
    k: int
    p: float
    users_evaluated: int
    group_frequency: np.ndarray = field(repr=False)
    group_recall: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v
        return {
            "recall": float(self.recall),
            "ndcg": float(self.ndcg),
            "k": int(self.k),
            "p": float(self.p),
            "users_evaluated": int(self.users_evaluated),
            "group_frequency": [float(x) for x in self.group_frequency],
            "group_recall": [clean(float(x)) for x in self.group_recall],
        }


def evaluate(final, dataset: InteractionDataset, k: int = 20, p: float = 1.0, groups=None,
             split: str = "test", threads: int = 1, num_groups: int = 5) -> EvalReport:
    """Recall/NDCG@k over users with a non-empty ``split``, plus group breakdowns.

    Candidates are all items outside the user's train set.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    targets = getattr(dataset, split)
    if groups is None:
        groups = assign_groups(dataset.popularity, min(num_groups, dataset.num_items))
    users = np.array([u for u in range(dataset.num_users) if len(targets[u])], dtype=np.int64)
    lists = topk_for_users(final, dataset, users, k, p, threads)
    tests = [targets[u] for u in users]
    recalls = [recall_at_k(lst, t, k) for lst, t in zip(lists, tests)]
    ndcgs = [ndcg_at_k(lst, t, k) for lst, t in zip(lists, tests)]
    return EvalReport(
        recall=float(np.mean(recalls)) if recalls else 0.0,
        ndcg=float(np.mean(ndcgs)) if ndcgs else 0.0,
        k=k,
        p=float(p),
        users_evaluated=int(users.size),
        group_frequency=group_frequency(lists, groups),
        group_recall=group_recall(lists, tests, groups, k),
    )


def p_sweep(final, dataset: InteractionDataset, groups: PopularityGroups, p_grid, k: int = 20,
            threads: int = 1) -> list:
    """One :class:`EvalReport` per normalization strength, same embeddings throughout."""
    p_grid = list(p_grid)
    if not p_grid:
        raise ValueError("empty p grid")
    return [evaluate(final, dataset, k=k, p=p, groups=groups, threads=threads) for p in p_grid]


def magnitude_popularity_correlation(item_emb: np.ndarray, popularity) -> float:
    """Pearson r between item embedding norms and popularity counts (NaN if undefined)."""
    mags = np.linalg.norm(np.asarray(item_emb, dtype=np.float64), axis=1)
    pop = np.asarray(popularity, dtype=np.float64)
    if mags.size != pop.size:
        raise ValueError("one popularity value per item required")
    dm, dp = mags - mags.mean(), pop - pop.mean()
    sm, spp = np.sqrt(dm @ dm), np.sqrt(dp @ dp)
    if mags.size < 2 or sm == 0.0 or spp == 0.0:
        logger.warning("correlation undefined: zero variance in magnitudes or popularity")
        return float("nan")
    return float(np.clip((dm @ dp) / (sm * spp), -1.0, 1.0))


QUADRANTS = ("positive_popular", "negative_popular", "positive_unpopular", "negative_unpopular")


@dataclass(eq=False)
class CosineQuadrantStats:
    """Per-user mean cosine to each item quadrant.

    ``user_means`` is ``num_users x 4`` in :data:`QUADRANTS` order, NaN where
    the quadrant is empty for that user; ``histograms`` counts users per bin.
    """

    user_means: np.ndarray
    histograms: np.ndarray
    bin_edges: np.ndarray
    popular: np.ndarray

    def quadrant(self, name: str) -> np.ndarray:
        return self.user_means[:, QUADRANTS.index(name)]

    def separation(self, popular: bool = False) -> float:
        """Fraction of users (both quadrants non-empty) whose positive mean beats the negative one."""
        tag = "popular" if popular else "unpopular"
        pos, neg = self.quadrant(f"positive_{tag}"), self.quadrant(f"negative_{tag}")
        ok = ~np.isnan(pos) & ~np.isnan(neg)
        return float(np.mean(pos[ok] > neg[ok])) if ok.any() else float("nan")


def _unit_rows(x):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def cosine_quadrant_analysis(final, dataset: InteractionDataset, popular_fraction: float = 0.2,
                             bins: int = 50) -> CosineQuadrantStats:
    """Mean user-item cosine split by popularity and by test membership.

    The most popular ``popular_fraction`` of items (ties by id) form the
    popular side.  Positives are the user's test items; negatives are items
    the user never interacted with in any split.
    """
    if not 0.0 < popular_fraction < 1.0:
        raise ValueError("popular_fraction must be in (0, 1)")
    I = dataset.num_items
    order = np.lexsort((np.arange(I), -dataset.popularity))
    n_pop = max(1, int(math.floor(popular_fraction * I)))
    popular = np.zeros(I, dtype=bool)
    popular[order[:n_pop]] = True

    users_hat = _unit_rows(np.asarray(final.users, dtype=np.float64))
    items_hat = _unit_rows(np.asarray(final.items, dtype=np.float64))
    means = np.full((dataset.num_users, 4), np.nan)
    for start in range(0, dataset.num_users, USER_CHUNK):
        block = np.arange(start, min(start + USER_CHUNK, dataset.num_users))
        cos = users_hat[block] @ items_hat.T
        for row, u in enumerate(block):
            positive = np.zeros(I, dtype=bool)
            positive[dataset.test[u]] = True
            negative = ~positive
            negative[dataset.train[u]] = False
            negative[dataset.validation[u]] = False
            for q, mask in enumerate((positive & popular, negative & popular,
                                      positive & ~popular, negative & ~popular)):
                if mask.any():
                    means[u, q] = cos[row, mask].mean()
    edges = np.linspace(-1.0, 1.0, bins + 1)
    hist = np.zeros((4, bins), dtype=np.int64)
    for q in range(4):
        col = means[:, q]
        hist[q], _ = np.histogram(np.clip(col[~np.isnan(col)], -1.0, 1.0), bins=edges)
    return CosineQuadrantStats(means, hist, edges, popular)
