"""
Test-time embedding normalization
=================================

score(u, i) = cos(e_u, e_i) * ||e_i|| ** (1 - p).  p = 0 ranks like the inner
product, p = 1 by cosine alone.  The user norm never changes a ranking.
"""

# %%
import numpy as np

from tten import FinalEmbeddings, recommend_topk, tten_score

e_u = np.array([1.0, 0.0])
items = np.array([[0.9, 0.1],    # well aligned, small
                  [3.0, 3.0],    # less aligned, large
                  [0.0, 1.0]])
for p in (0.0, 0.5, 1.0):
    print(p, [round(tten_score(e_u, e_i, p), 4) for e_i in items])

# %% the large item wins at p=0 and loses at p=1
final = FinalEmbeddings(np.vstack([e_u, items]), 1, 3)
for p in (0.0, 1.0):
    print(f"p={p}: top-2", recommend_topk(final, 0, 2, p).items)

# %% scaling the user does nothing
scaled = FinalEmbeddings(np.vstack([100 * e_u, items]), 1, 3)
print(recommend_topk(scaled, 0, 3, 0.5).items, recommend_topk(final, 0, 3, 0.5).items)
