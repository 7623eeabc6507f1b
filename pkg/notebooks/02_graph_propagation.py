"""
Normalized adjacency and layer-mean propagation
===============================================
"""

# %%
import numpy as np

from tten import EmbeddingModel, build_norm_adjacency, forward
from tten.dataset import InteractionDataset

# two users, three items
rows = lambda *r: tuple(np.array(x, dtype=np.int64) for x in r)
ds = InteractionDataset(2, 3, rows([0, 1], [1, 2]), rows([], []), rows([], []))
adj = build_norm_adjacency(ds)
print(adj.matrix.toarray().round(4))  # weight 1/sqrt(deg_u * deg_i); item 1 has degree 2

# %% the sparse forward pass against an explicit dense sum
E = np.random.default_rng(0).standard_normal((5, 2))
A = adj.matrix.toarray()
dense = (E + A @ E + A @ A @ E + A @ A @ A @ E) / 4
sparse = forward(EmbeddingModel(E, 2, 3, num_layers=3), adj).final
print("max abs difference:", np.abs(dense - sparse).max())

# %% self-adjoint: <A x, y> == <x, A y>
X, Y = np.random.default_rng(1).standard_normal((2, 5, 2))
print(np.sum((A @ X) * Y), np.sum(X * (A @ Y)))
