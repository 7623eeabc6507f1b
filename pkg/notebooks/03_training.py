"""
Training with BPR and sampled softmax
=====================================

Gradients are derived by hand and checked against central differences; Adam
only moves rows that received a gradient.
"""

# %%
import numpy as np

from tten import TrainConfig, build_norm_adjacency, init_xavier, train
from tten.dataset import SyntheticSpec, generate_synthetic, split_validation
from tten.training import sample_ssm_batch, ssm_loss_and_grad

data = generate_synthetic(SyntheticSpec(num_users=200, num_items=120, interactions_per_user=15, seed=1))
ds = split_validation(data.dataset, 0.5, seed=1)

# %% gradient check on one batch
adj = build_norm_adjacency(ds)
model = init_xavier(ds.num_users, ds.num_items, dim=8, seed=0)
batch = sample_ssm_batch(ds, 32, np.random.default_rng(0))
loss, grad = ssm_loss_and_grad(model, adj, batch, temperature=0.1, l2=0.0)
row, col, h = ds.num_users + int(batch[0, 1]), 3, 1e-5
plus, minus = model.copy(), model.copy()
plus.base[row, col] += h
minus.base[row, col] -= h
numeric = (ssm_loss_and_grad(plus, adj, batch, 0.1, 0.0)[0] - ssm_loss_and_grad(minus, adj, batch, 0.1, 0.0)[0]) / (2 * h)
print(f"analytic {grad[row, col]:.8f}  numeric {numeric:.8f}")

# %% a short run of each loss
for kind in ("bpr", "ssm"):
    cfg = TrainConfig(loss_kind=kind, dim=16, learning_rate=1e-2, batch_size=512, max_epochs=15, eval_every=5, seed=0)
    model, report = train(ds, cfg)
    print(kind, "losses", np.round(report.epoch_losses[:3], 4), "...",
          "best validation recall", round(report.best_recall, 4), "at epoch", report.best_epoch)
