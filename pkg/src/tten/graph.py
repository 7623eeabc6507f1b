"""Symmetric-normalized user-item adjacency for LightGCN propagation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dataset import InteractionDataset

__all__ = ["NormalizedAdjacency", "build_norm_adjacency", "propagate"]


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """``D^-1/2 A D^-1/2`` over ``U + I`` nodes; users first, then items.

    ``matrix`` is CSR, so both user and item rows are contiguous.  Isolated
    nodes have empty rows.
    """

    num_users: int
    num_items: int
    matrix: sp.csr_matrix

    @property
    def node_count(self) -> int:
        return self.num_users + self.num_items


def build_norm_adjacency(dataset: InteractionDataset) -> NormalizedAdjacency:
    users, items = dataset.train_pairs()
    U, I = dataset.num_users, dataset.num_items
    deg_u = np.bincount(users, minlength=U).astype(np.float64)
    deg_i = np.bincount(items, minlength=I).astype(np.float64)
    w = 1.0 / np.sqrt(deg_u[users] * deg_i[items])
    rows = np.concatenate([users, items + U])
    cols = np.concatenate([items + U, users])
    data = np.concatenate([w, w])
    mat = sp.csr_matrix((data, (rows, cols)), shape=(U + I, U + I))
    mat.sort_indices()
    return NormalizedAdjacency(U, I, mat)


def propagate(adj: NormalizedAdjacency, embeddings: np.ndarray) -> np.ndarray:
    """One propagation layer: ``A_norm @ embeddings``."""
    embeddings = np.asarray(embeddings)
    if embeddings.ndim != 2 or embeddings.shape[0] != adj.node_count:
        raise ValueError(f"expected ({adj.node_count}, d) embeddings, got {embeddings.shape}")
    return np.asarray(adj.matrix @ embeddings)
