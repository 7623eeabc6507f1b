"""
Popularity bias in a trained model
==================================

Trains a small sampled-softmax model, then looks at how item magnitude tracks
popularity, how the normalization strength p shifts recommendations between
popularity groups, and how cosine separates test items from the rest.
"""

# %%
import numpy as np

from tten import TrainConfig, assign_groups, build_norm_adjacency, forward, train
from tten.dataset import SyntheticSpec, generate_synthetic, split_validation
from tten.evaluation import cosine_quadrant_analysis, magnitude_popularity_correlation, p_sweep

data = generate_synthetic(SyntheticSpec(num_users=400, num_items=200, interactions_per_user=20, seed=2))
ds = split_validation(data.dataset, 0.5, seed=2)
model, report = train(ds, TrainConfig(dim=32, batch_size=1024, max_epochs=20, seed=2))
final = forward(model, build_norm_adjacency(ds))

# %%
print("pearson r(magnitude, popularity):", round(magnitude_popularity_correlation(final.items, ds.popularity), 3))

# %% p sweep on the test split
groups = assign_groups(ds.popularity, 5)
for row in p_sweep(final, ds, groups, [0.0, 0.5, 1.0], k=20):
    print(f"p={row.p}: recall {row.recall:.4f}  group shares {np.round(row.group_frequency, 3)}")

# %% mean cosine per quadrant; separation = users with positive > negative
stats = cosine_quadrant_analysis(final, ds)
print("unpopular items separated for", f"{stats.separation(popular=False):.1%}", "of users")
print("popular items separated for", f"{stats.separation(popular=True):.1%}", "of users")
