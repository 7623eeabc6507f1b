"""LightGCN embedding tables, layer-mean forward pass and its adjoint."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import NormalizedAdjacency, propagate

__all__ = [
    "EmbeddingModel",
    "FinalEmbeddings",
    "EmbeddingFileError",
    "backward",
    "forward",
    "init_xavier",
    "load_embeddings",
    "save_embeddings",
]

MAGIC = "TTEN-EMB"
VERSION = 1


@dataclass(eq=False)
class EmbeddingModel:
    """Base (layer-0) embeddings: rows ``0..U-1`` users, ``U..U+I-1`` items."""

    base: np.ndarray
    num_users: int
    num_items: int
    num_layers: int = 3

    def __post_init__(self):
        if self.base.shape[0] != self.num_users + self.num_items:
            raise ValueError("base row count must equal num_users + num_items")
        if self.base.ndim != 2 or self.base.shape[1] < 1:
            raise ValueError("base must be a 2-D table with dim >= 1")
        if self.num_layers < 0:
            raise ValueError("num_layers must be >= 0")

    @property
    def dim(self) -> int:
        return self.base.shape[1]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.base.copy(), self.num_users, self.num_items, self.num_layers)


@dataclass(frozen=True, eq=False)
class FinalEmbeddings:
    final: np.ndarray
    num_users: int
    num_items: int
    layers: list | None = None

    @property
    def users(self) -> np.ndarray:
        return self.final[:self.num_users]

    @property
    def items(self) -> np.ndarray:
        return self.final[self.num_users:]


def init_xavier(num_users: int, num_items: int, dim: int, seed: int, num_layers: int = 3) -> EmbeddingModel:
    """Xavier-uniform table with fan_in = fan_out = dim, i.e. U(-sqrt(3/d), sqrt(3/d))."""
    if num_users < 0 or num_items < 0 or dim < 1:
        raise ValueError("sizes must be positive")
    bound = np.sqrt(3.0 / dim)
    rng = np.random.default_rng(seed)
    base = rng.uniform(-bound, bound, size=(num_users + num_items, dim))
    return EmbeddingModel(base, num_users, num_items, num_layers)


def _layer_mean(adj, x, num_layers, keep):
    acc = x.copy()
    layers = [x] if keep else None
    cur = x
    for _ in range(num_layers):
        cur = propagate(adj, cur)
        acc += cur
        if keep:
            layers.append(cur)
    acc /= num_layers + 1
    return acc, layers


def forward(model: EmbeddingModel, adj: NormalizedAdjacency, keep_cache: bool = False) -> FinalEmbeddings:
    if adj.node_count != model.base.shape[0]:
        raise ValueError("adjacency node count does not match the embedding table")
    final, layers = _layer_mean(adj, model.base, model.num_layers, keep_cache)
    return FinalEmbeddings(final, model.num_users, model.num_items, layers)


def backward(grad_final: np.ndarray, adj: NormalizedAdjacency, num_layers: int) -> np.ndarray:
    """Gradient w.r.t. base embeddings given the gradient w.r.t. final ones.

    The normalized adjacency is symmetric, so the adjoint of the layer mean is
    the same layer mean applied to the incoming gradient.
    """
    grad_final = np.asarray(grad_final, dtype=np.float64)
    if grad_final.ndim != 2 or grad_final.shape[0] != adj.node_count:
        raise ValueError(f"expected ({adj.node_count}, d) gradient, got {grad_final.shape}")
    grad, _ = _layer_mean(adj, grad_final, num_layers, False)
    return grad


class EmbeddingFileError(ValueError):
    pass


def save_embeddings(table: np.ndarray, num_users: int, num_items: int, path) -> None:
    table = np.asarray(table, dtype=np.float64)
    if table.shape[0] != num_users + num_items:
        raise ValueError("row count must equal num_users + num_items")
    dim = table.shape[1] if table.ndim == 2 else 0
    lines = [f"{MAGIC} {VERSION} {num_users} {num_items} {dim}"]
    for r, row in enumerate(table):
        lines.append(" ".join([str(r)] + [f"{v:.9g}" for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_embeddings(path):
    """Read an embedding file; returns ``(table, num_users, num_items)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != MAGIC:
            raise EmbeddingFileError(f"{path}: bad header {' '.join(header)!r}")
        if int(header[1]) != VERSION:
            raise EmbeddingFileError(f"{path}: unsupported version {header[1]}")
        num_users, num_items, dim = (int(x) for x in header[2:])
        n = num_users + num_items
        table = np.zeros((n, dim))
        r = -1
        for r, line in enumerate(fh):
            parts = line.split()
            if r >= n:
                if parts:
                    raise EmbeddingFileError(f"{path}: row {r}: more rows than header declares")
                continue
            if len(parts) != dim + 1:
                raise EmbeddingFileError(f"{path}: row {r}: expected {dim} values, got {len(parts) - 1}")
            try:
                idx = int(parts[0])
                table[r] = [float(v) for v in parts[1:]]
            except ValueError:
                raise EmbeddingFileError(f"{path}: row {r}: unparsable value") from None
            if idx != r:
                raise EmbeddingFileError(f"{path}: row {r}: index {idx} out of order")
        if r + 1 < n:
            raise EmbeddingFileError(f"{path}: expected {n} rows, found {r + 1}")
    return table, num_users, num_items
