"""
Ranking metrics and popularity groups
=====================================
"""

# %%
import math

import numpy as np

from tten import assign_groups, group_frequency, ndcg_at_k, recall_at_k

ranked = [7, 3, 9]
print("recall@3", recall_at_k(ranked, {3, 4}, 3))
print("ndcg@3 single hit at rank 2", ndcg_at_k(ranked, {3}, 3), 1 / math.log2(3))

# %% five equal groups by train popularity, group 5 the most popular
popularity = np.array([50, 1, 7, 7, 0, 30, 2, 9, 4, 12])
groups = assign_groups(popularity, 5)
print(groups.assignment)

# %% share of recommendation slots per group
lists = [np.array([0, 5]), np.array([0, 9]), np.array([3, 1])]
print(group_frequency(lists, groups))
