import math
from types import SimpleNamespace

import numpy as np
import pytest

from tten.dataset import InteractionDataset, PopularityGroups, assign_groups
from tten.evaluation import (
    QUADRANTS,
    cosine_quadrant_analysis,
    evaluate,
    group_frequency,
    group_recall,
    magnitude_popularity_correlation,
    ndcg_at_k,
    p_sweep,
    recall_at_k,
)
from tten.scoring import tten_score


def _ds(U, I, train, test, validation=None):
    a = lambda rows: tuple(np.array(sorted(r), dtype=np.int64) for r in rows)
    validation = validation or [[] for _ in range(U)]
    return InteractionDataset(U, I, a(train), a(validation), a(test))


def test_recall_definition():
    assert recall_at_k([5, 1, 2], {1, 9}, 3) == 0.5
    assert recall_at_k([1, 9, 3], {1, 9}, 2) == 1.0
    assert recall_at_k([3, 1, 9], {1, 9}, 1) == 0.0


def test_ndcg_values():
    assert ndcg_at_k([7, 1, 2], {7}, 3) == 1.0
    assert ndcg_at_k([1, 7, 2], {7}, 3) == pytest.approx(1 / math.log2(3), abs=1e-12)
    assert ndcg_at_k([1, 7, 2], {7}, 3) == pytest.approx(0.630930, abs=1e-6)
    assert ndcg_at_k([1, 2, 3], {7}, 3) == 0.0


def test_ndcg_is_one_only_for_ideal_prefix():
    assert ndcg_at_k([4, 5, 0, 1], {4, 5, 6}, 2) == 1.0
    assert ndcg_at_k([4, 0, 5, 1], {4, 5, 6}, 2) < 1.0


def _oracle_recall(ranked, test, k):
    return len(set(ranked[:k]) & set(test)) / len(test)


def _oracle_ndcg(ranked, test, k):
    dcg = sum(1 / math.log2(pos + 1) for pos in range(1, k + 1) if pos <= len(ranked) and ranked[pos - 1] in test)
    idcg = sum(1 / math.log2(pos + 1) for pos in range(1, min(len(test), k) + 1))
    return dcg / idcg


def test_metrics_against_oracles(rng):
    for _ in range(200):
        n = int(rng.integers(1, 9))
        ranked = rng.permutation(8)[:n].tolist()
        test = set(rng.choice(8, size=int(rng.integers(1, 5)), replace=False).tolist())
        k = int(rng.integers(1, 6))
        assert recall_at_k(ranked, test, k) == _oracle_recall(ranked, test, k)
        assert abs(ndcg_at_k(ranked, test, k) - _oracle_ndcg(ranked, test, k)) <= 1e-12
        assert ndcg_at_k(ranked, test, k) <= 1.0


def test_group_frequency_counts():
    groups = PopularityGroups(5, np.array([1, 2, 3, 4, 5, 5]))
    assert group_frequency([[4, 5], [5, 4]], groups).tolist() == [0, 0, 0, 0, 1]
    assert group_frequency([[4, 5], [0, 0]], groups).tolist() == [0.5, 0, 0, 0, 0.5]


def test_group_recall_counts():
    groups = PopularityGroups(2, np.array([1, 1, 2, 2]))
    out = group_recall([[0, 2], [1, 3]], [[0, 1], [1, 3]], groups, 2)
    # group1: test items 0,1 (u0) and 1 (u1) -> hits 0 (u0), 1 (u1) = 2/3; group2: 3 -> hit
    np.testing.assert_allclose(out, [2 / 3, 1.0])
    assert np.all(group_recall([[2], [2]], [[0], [1]], groups, 1)[:1] == 0.0)
    assert math.isnan(group_recall([[0]], [[1]], groups, 1)[1])


def _brute_group_recall(lists, tests, assignment, G, k):
    out = []
    for g in range(1, G + 1):
        num = den = 0
        for lst, t in zip(lists, tests):
            tg = [i for i in t if assignment[i] == g]
            den += len(tg)
            num += len([i for i in lst[:k] if i in tg])
        out.append(num / den if den else float("nan"))
    return np.array(out)


def test_group_recall_matches_oracle(rng):
    for _ in range(50):
        assignment = rng.integers(1, 4, size=8)
        groups = PopularityGroups(3, assignment)
        lists = [rng.permutation(8)[:4].tolist() for _ in range(5)]
        tests = [rng.choice(8, size=int(rng.integers(0, 4)), replace=False).tolist() for _ in range(5)]
        np.testing.assert_array_equal(group_recall(lists, tests, groups, 3),
                                      _brute_group_recall(lists, tests, assignment, 3, 3))


def test_correlation_endpoints():
    pop = np.array([1.0, 4.0, 2.0, 9.0])
    emb = np.zeros((4, 3))
    emb[:, 0] = pop
    assert magnitude_popularity_correlation(emb, pop) == pytest.approx(1.0)
    emb[:, 0] = 10 - pop
    assert magnitude_popularity_correlation(emb, pop) == pytest.approx(-1.0)
    assert math.isnan(magnitude_popularity_correlation(np.ones((4, 2)), pop))


def _brute_evaluate(users, items, ds, k, p, assignment, G):
    lists, tests = [], []
    for u in range(ds.num_users):
        if not len(ds.test[u]):
            continue
        scored = sorted((-tten_score(users[u], items[i], p), i) for i in range(ds.num_items)
                        if i not in set(ds.train[u].tolist()))
        lists.append([i for _, i in scored[:k]])
        tests.append(ds.test[u].tolist())
    recall = np.mean([_oracle_recall(lst, t, k) for lst, t in zip(lists, tests)])
    ndcg = np.mean([_oracle_ndcg(lst, t, k) for lst, t in zip(lists, tests)])
    freq = np.zeros(G)
    for lst in lists:
        for i in lst:
            freq[assignment[i] - 1] += 1
    return recall, ndcg, freq / freq.sum(), _brute_group_recall(lists, tests, assignment, G, k)


def _random_instance(rng, U=6, I=8):
    train, test = [], []
    for _ in range(U):
        perm = rng.permutation(I)
        a, b = rng.integers(1, 3), rng.integers(0, 3)
        train.append(perm[:a].tolist())
        test.append(perm[a:a + b].tolist())
    ds = _ds(U, I, train, test)
    emb = rng.standard_normal((U + I, 3)) * rng.uniform(0.2, 3.0, (U + I, 1))
    return ds, SimpleNamespace(users=emb[:U], items=emb[U:])


@pytest.mark.parametrize("p", [0.0, 0.5, 1.0])
def test_evaluate_matches_exhaustive_oracle(p):
    rng = np.random.default_rng(7)
    for _ in range(20):
        ds, final = _random_instance(rng)
        groups = assign_groups(ds.popularity, 3)
        k = int(rng.integers(1, 6))
        rep = evaluate(final, ds, k=k, p=p, groups=groups)
        recall, ndcg, freq, grec = _brute_evaluate(final.users, final.items, ds, k, p, groups.assignment, 3)
        assert rep.recall == pytest.approx(recall, abs=1e-12)
        assert rep.ndcg == pytest.approx(ndcg, abs=1e-12)
        np.testing.assert_allclose(rep.group_frequency, freq, atol=1e-12)
        np.testing.assert_array_equal(np.isnan(rep.group_recall), np.isnan(grec))
        np.testing.assert_allclose(rep.group_recall, grec, atol=1e-12)
        assert rep.users_evaluated == sum(1 for t in ds.test if len(t))
        assert abs(rep.group_frequency.sum() - 1) <= 1e-9


def test_p_one_equals_prenormalized_inner_product():
    rng = np.random.default_rng(3)
    for _ in range(10):
        ds, final = _random_instance(rng, U=12, I=15)
        unit = SimpleNamespace(users=final.users, items=final.items / np.linalg.norm(final.items, axis=1, keepdims=True))
        a = evaluate(final, ds, k=4, p=1.0).to_dict()
        b = evaluate(unit, ds, k=4, p=0.0).to_dict()
        b["p"] = 1.0
        assert a == b


def test_threads_do_not_change_results():
    rng = np.random.default_rng(5)
    ds, final = _random_instance(rng, U=700, I=30)
    assert evaluate(final, ds, k=5, threads=1).to_dict() == evaluate(final, ds, k=5, threads=3).to_dict()


def test_p_sweep_consistency():
    rng = np.random.default_rng(11)
    ds, final = _random_instance(rng, U=20, I=12)
    groups = assign_groups(ds.popularity, 4)
    rows = p_sweep(final, ds, groups, [1.0], k=3)
    assert rows[0].to_dict() == evaluate(final, ds, k=3, p=1.0, groups=groups).to_dict()
    with pytest.raises(ValueError):
        p_sweep(final, ds, groups, [], k=3)


def test_sweep_pushes_recommendations_away_from_large_norms():
    # item norms grow with popularity while directions are random
    rng = np.random.default_rng(2)
    U, I = 50, 40
    train = [rng.choice(I, size=3, replace=False, p=np.arange(1, I + 1) / np.sum(np.arange(1, I + 1))).tolist()
             for _ in range(U)]
    test = [[i for i in rng.permutation(I)[:3].tolist() if i not in tr] for tr in train]
    ds = _ds(U, I, train, test)
    items = rng.standard_normal((I, 4))
    items /= np.linalg.norm(items, axis=1, keepdims=True)
    items *= (1 + ds.popularity)[:, None]
    final = SimpleNamespace(users=rng.standard_normal((U, 4)), items=items)
    groups = assign_groups(ds.popularity, 5)
    lo, hi = p_sweep(final, ds, groups, [0.0, 1.0], k=5)
    assert lo.group_frequency[4] >= hi.group_frequency[4]


def test_quadrants_degenerate_identical_embeddings():
    ds = _ds(2, 6, [[0], [1]], [[2, 5], [3]])
    final = SimpleNamespace(users=np.ones((2, 3)), items=np.ones((6, 3)))
    stats = cosine_quadrant_analysis(final, ds, popular_fraction=0.5)
    finite = stats.user_means[~np.isnan(stats.user_means)]
    np.testing.assert_allclose(finite, 1.0)
    assert stats.histograms.shape == (4, 50)
    assert stats.histograms.sum(axis=1).tolist() == list(np.sum(~np.isnan(stats.user_means), axis=0))


def test_quadrants_positive_beats_negative_by_construction():
    rng = np.random.default_rng(0)
    U, I = 30, 40
    users = rng.standard_normal((U, 5))
    items = rng.standard_normal((I, 5))
    cos = (users / np.linalg.norm(users, axis=1, keepdims=True)) @ (items / np.linalg.norm(items, axis=1, keepdims=True)).T
    train, test = [], []
    for u in range(U):
        order = np.argsort(-cos[u])
        test.append(order[:4].tolist())       # nearest items are the positives
        train.append(order[-2:].tolist())
    ds = _ds(U, I, train, test)
    stats = cosine_quadrant_analysis(SimpleNamespace(users=users, items=items), ds)
    allpos = np.nanmean(stats.user_means[:, [0, 2]], axis=1)
    allneg = np.nanmean(stats.user_means[:, [1, 3]], axis=1)
    assert np.all(allpos > allneg)
    assert stats.popular.sum() == 8
    assert QUADRANTS[2] == "positive_unpopular"
