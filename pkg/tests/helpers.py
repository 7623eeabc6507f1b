import numpy as np

from tten.dataset import InteractionDataset


def random_bipartite(rng, num_users, num_items, density=0.4, min_one=True):
    """Random dataset; optionally forces every user to have one train item."""
    train = []
    for _ in range(num_users):
        row = np.flatnonzero(rng.random(num_items) < density)
        if min_one and row.size == 0:
            row = np.array([rng.integers(num_items)])
        train.append(row.astype(np.int64))
    empty = tuple(np.empty(0, dtype=np.int64) for _ in range(num_users))
    return InteractionDataset(num_users, num_items, tuple(train), empty, empty)


def dense_adjacency(dataset):
    """Reference D^-1/2 A D^-1/2 built with dense linear algebra."""
    U, I = dataset.num_users, dataset.num_items
    A = np.zeros((U + I, U + I))
    for u, items in enumerate(dataset.train):
        A[u, U + items] = 1.0
        A[U + items, u] = 1.0
    deg = A.sum(axis=1)
    d = np.zeros_like(deg)
    d[deg > 0] = deg[deg > 0] ** -0.5
    return d[:, None] * A * d[None, :]
