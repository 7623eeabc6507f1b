"""Implicit-feedback interaction data: loading, splitting, popularity and synthesis.

Interaction files hold one user per line::

    <user_id> <item_id> <item_id> ...

Blank lines are skipped; a line holding only a user id means the user has
no interactions in that split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "DatasetError",
    "InteractionDataset",
    "PopularityGroups",
    "SyntheticSpec",
    "SyntheticData",
    "assign_groups",
    "compute_popularity",
    "generate_synthetic",
    "load_dataset",
    "read_interactions",
    "save_dataset",
    "split_validation",
    "write_interactions",
]


class DatasetError(ValueError):
    """Raised for malformed interaction files or inconsistent splits."""


def _as_sets(rows, num_users):
    out = [np.empty(0, dtype=np.int64) for _ in range(num_users)]
    for u, items in rows.items():
        out[u] = np.unique(np.asarray(items, dtype=np.int64))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class InteractionDataset:
    """Train/validation/test interactions over dense user and item ids.

    Each split is a tuple with one sorted ``int64`` array of item ids per
    user.  ``user_ids``/``item_ids`` map dense ids back to the ids used in
    the source files; they are ``None`` when the files were already dense.
    """

    num_users: int
    num_items: int
    train: tuple
    validation: tuple
    test: tuple
    user_ids: np.ndarray | None = None
    item_ids: np.ndarray | None = None
    popularity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("train", "validation", "test"):
            split = getattr(self, name)
            if len(split) != self.num_users:
                raise DatasetError(f"{name} split has {len(split)} users, expected {self.num_users}")
            for u, items in enumerate(split):
                if items.size and (items[0] < 0 or items[-1] >= self.num_items):
                    raise DatasetError(f"{name}: user {u} has item id outside [0, {self.num_items})")
                if items.size > 1 and np.any(np.diff(items) <= 0):
                    raise DatasetError(f"{name}: user {u} items not sorted/unique")
        for u in range(self.num_users):
            tr, va, te = self.train[u], self.validation[u], self.test[u]
            for a, b, label in ((tr, te, "train/test"), (tr, va, "train/validation"), (va, te, "validation/test")):
                both = np.intersect1d(a, b, assume_unique=True)
                if both.size:
                    raise DatasetError(f"user {u} item {int(both[0])} appears in both {label}")
        object.__setattr__(self, "popularity", compute_popularity(self))

    @property
    def num_train(self) -> int:
        return int(sum(len(x) for x in self.train))

    def train_pairs(self):
        """Flattened (users, items) arrays of every train interaction, user-major."""
        lengths = np.fromiter((len(x) for x in self.train), dtype=np.int64, count=self.num_users)
        users = np.repeat(np.arange(self.num_users, dtype=np.int64), lengths)
        items = np.concatenate(self.train) if self.num_users else np.empty(0, dtype=np.int64)
        return users, items.astype(np.int64, copy=False)

    def equals(self, other: "InteractionDataset") -> bool:
        if (self.num_users, self.num_items) != (other.num_users, other.num_items):
            return False
        for name in ("train", "validation", "test"):
            a, b = getattr(self, name), getattr(other, name)
            if any(not np.array_equal(x, y) for x, y in zip(a, b)):
                return False
        return True


def compute_popularity(dataset: InteractionDataset) -> np.ndarray:
    """Per-item number of train interactions; validation and test never count."""
    counts = np.zeros(dataset.num_items, dtype=np.int64)
    for items in dataset.train:
        counts[items] += 1
    return counts


@dataclass(frozen=True)
class PopularityGroups:
    num_groups: int
    assignment: np.ndarray  # group in 1..num_groups, num_groups = most popular

    def members(self, group: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == group)


def assign_groups(popularity, num_groups: int = 5) -> PopularityGroups:
    """Equal-size popularity buckets.

    Items are ordered by popularity (descending, ties by ascending id) and cut
    into contiguous blocks; the first ``len % num_groups`` blocks (the most
    popular) take one extra item.
    """
    popularity = np.asarray(popularity)
    n = popularity.size
    if num_groups < 1 or num_groups > n:
        raise ValueError(f"num_groups must be in [1, {n}], got {num_groups}")
    order = np.lexsort((np.arange(n), -popularity))
    base, extra = divmod(n, num_groups)
    sizes = [base + (1 if g < extra else 0) for g in range(num_groups)]
    assignment = np.empty(n, dtype=np.int64)
    start = 0
    for g, size in enumerate(sizes):
        assignment[order[start:start + size]] = num_groups - g
        start += size
    return PopularityGroups(num_groups, assignment)


# -- file IO -----------------------------------------------------------------

def read_interactions(path) -> dict:
    """Parse an interaction file into ``{user_id: [item ids]}`` (source ids)."""
    rows: dict[int, list[int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                ids = [int(p) for p in parts]
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer token in {line.strip()!r}") from None
            if min(ids) < 0:
                raise DatasetError(f"{path}:{lineno}: negative id")
            user, items = ids[0], ids[1:]
            if len(set(items)) != len(items):
                raise DatasetError(f"{path}:{lineno}: duplicate item for user {user}")
            if user in rows:
                raise DatasetError(f"{path}:{lineno}: user {user} listed twice")
            rows[user] = items
    return rows


def write_interactions(path, split, user_ids=None, item_ids=None) -> None:
    lines = []
    for u, items in enumerate(split):
        uid = int(user_ids[u]) if user_ids is not None else u
        ids = item_ids[items] if item_ids is not None else items
        lines.append(" ".join([str(uid)] + [str(int(i)) for i in ids]))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _id_map(ids):
    ids = np.unique(np.fromiter(ids, dtype=np.int64))
    if ids.size == 0 or ids[-1] == ids.size - 1:
        return None, (int(ids[-1]) + 1 if ids.size else 0)
    return ids, int(ids.size)


def _remap(rows, user_map, item_map):
    out = {}
    for u, items in rows.items():
        du = int(np.searchsorted(user_map, u)) if user_map is not None else u
        di = np.searchsorted(item_map, items) if item_map is not None else items
        out[du] = di
    return out


def load_dataset(train_path, test_path, validation_fraction: float = 0.0, seed: int = 0,
                 validation_path=None, num_items: int | None = None) -> InteractionDataset:
    """Read train/test files and carve a per-user validation split out of test.

    Ids are kept as-is when they already form ``0..n-1``; otherwise they are
    densified and the original ids kept on the dataset.  ``num_items`` pins
    the item count (ids kept as-is) so items without any interaction survive
    a write/read round trip.  With ``validation_path`` the stored validation
    split is used and ``validation_fraction`` is ignored.
    """
    if not 0.0 <= validation_fraction < 1.0:
        raise ValueError("validation_fraction must be in [0, 1)")
    splits = [read_interactions(train_path), read_interactions(test_path)]
    if validation_path is not None:
        splits.append(read_interactions(validation_path))
    user_map, n_users = _id_map(u for s in splits for u in s)
    if num_items is None:
        item_map, n_items = _id_map(i for s in splits for items in s.values() for i in items)
    else:
        item_map, n_items = None, int(num_items)
    remapped = [_remap(s, user_map, item_map) for s in splits]
    train = _as_sets(remapped[0], n_users)
    test = _as_sets(remapped[1], n_users)
    for u in range(n_users):
        clash = np.intersect1d(train[u], test[u])
        if clash.size:
            uid = int(user_map[u]) if user_map is not None else u
            iid = int(item_map[clash[0]]) if item_map is not None else int(clash[0])
            raise DatasetError(f"user {uid} has item {iid} in both train and test")
    if validation_path is not None:
        validation = _as_sets(remapped[2], n_users)
        return InteractionDataset(n_users, n_items, train, validation, test, user_map, item_map)
    empty = tuple(np.empty(0, dtype=np.int64) for _ in range(n_users))
    dataset = InteractionDataset(n_users, n_items, train, empty, test, user_map, item_map)
    return split_validation(dataset, validation_fraction, seed)


def split_validation(dataset: InteractionDataset, fraction: float, seed: int) -> InteractionDataset:
    """Move ``floor(fraction * |test_u|)`` random test items of each user to validation."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must be in [0, 1)")
    rng = np.random.default_rng(seed)
    validation, test = [], []
    for u in range(dataset.num_users):
        items = np.union1d(dataset.test[u], dataset.validation[u])
        n_val = int(np.floor(fraction * items.size))
        if n_val == 0:
            validation.append(np.empty(0, dtype=np.int64))
            test.append(items)
            continue
        picked = rng.choice(items.size, size=n_val, replace=False)
        mask = np.zeros(items.size, dtype=bool)
        mask[picked] = True
        validation.append(items[mask])
        test.append(items[~mask])
    return InteractionDataset(dataset.num_users, dataset.num_items, dataset.train,
                              tuple(validation), tuple(test), dataset.user_ids, dataset.item_ids)


def save_dataset(dataset: InteractionDataset, directory) -> dict:
    """Write train.txt, test.txt and (if non-empty) validation.txt; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"train": directory / "train.txt", "test": directory / "test.txt"}
    if any(len(v) for v in dataset.validation):
        paths["validation"] = directory / "validation.txt"
    for name, path in paths.items():
        write_interactions(path, getattr(dataset, name), dataset.user_ids, dataset.item_ids)
    return paths


# -- synthetic data ----------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic power-law benchmark.

    ``affinity_temperature`` sharpens the softmax over user-item affinities
    (cosines of unit latent vectors); lower values make users pickier.
    """

    num_users: int = 2000
    num_items: int = 1000
    latent_dim: int = 16
    popularity_exponent: float = 1.0
    popularity_mix: float = 0.5
    interactions_per_user: int = 40
    test_items_per_user: int = 5
    seed: int = 0
    affinity_temperature: float = 0.1
    num_groups: int = 5

    def __post_init__(self):
        if not 0.0 <= self.popularity_mix <= 1.0:
            raise ValueError("popularity_mix must be in [0, 1]")
        for name in ("num_users", "num_items", "latent_dim", "interactions_per_user",
                     "test_items_per_user", "num_groups"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.affinity_temperature <= 0:
            raise ValueError("affinity_temperature must be positive")
        if self.interactions_per_user + self.test_items_per_user > self.num_items:
            raise ValueError("interactions_per_user + test_items_per_user exceeds num_items")
        if self.num_groups > self.num_items:
            raise ValueError("num_groups exceeds num_items")


@dataclass(frozen=True, eq=False)
class SyntheticData:
    dataset: InteractionDataset
    user_latent: np.ndarray
    item_latent: np.ndarray
    base_popularity: np.ndarray  # pi, sums to 1


def _unit_sphere(rng, n, dim):
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Draw a dataset with a popularity-skewed train split and an unbiased test split.

    Train items of a user come from the mixture
    ``(1 - mix) * softmax(affinity / T) + mix * pi`` with ``pi`` a power law
    over a random item ranking.  Test items are the user's best-affinity
    unseen items, one popularity group (by ``pi``) drawn uniformly per slot,
    so every group is equally represented in test.
    """
    rng = np.random.default_rng(spec.seed)
    U, I = spec.num_users, spec.num_items
    users = _unit_sphere(rng, U, spec.latent_dim)
    items = _unit_sphere(rng, I, spec.latent_dim)

    ranks = np.empty(I, dtype=np.int64)
    ranks[rng.permutation(I)] = np.arange(1, I + 1)
    pi = ranks.astype(np.float64) ** (-spec.popularity_exponent)
    pi /= pi.sum()
    groups = assign_groups(pi, spec.num_groups)
    members = [np.flatnonzero(groups.assignment == g) for g in range(1, spec.num_groups + 1)]

    affinity = users @ items.T
    train, test = [], []
    for u in range(U):
        logits = affinity[u] / spec.affinity_temperature
        soft = np.exp(logits - logits.max())
        soft /= soft.sum()
        prob = (1.0 - spec.popularity_mix) * soft + spec.popularity_mix * pi
        prob /= prob.sum()
        # weighted sampling without replacement (Gumbel top-k)
        keys = np.log(prob) - np.log(-np.log(rng.random(I)))
        tr = np.sort(np.argpartition(-keys, spec.interactions_per_user - 1)[:spec.interactions_per_user])
        taken = np.zeros(I, dtype=bool)
        taken[tr] = True
        te = []
        for _ in range(spec.test_items_per_user):
            # fall back to any group with unseen items if the drawn one is exhausted
            order = rng.permutation(spec.num_groups)
            for g in order:
                cand = members[g][~taken[members[g]]]
                if cand.size:
                    best = cand[np.argmax(affinity[u, cand])]
                    te.append(best)
                    taken[best] = True
                    break
        train.append(tr.astype(np.int64))
        test.append(np.sort(np.asarray(te, dtype=np.int64)))
    empty = tuple(np.empty(0, dtype=np.int64) for _ in range(U))
    dataset = InteractionDataset(U, I, tuple(train), empty, tuple(test))
    return SyntheticData(dataset, users, items, pi)
