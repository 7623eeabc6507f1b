import numpy as np
import pytest

from helpers import dense_adjacency, random_bipartite
from tten.dataset import InteractionDataset
from tten.graph import build_norm_adjacency, propagate
from tten.model import (
    EmbeddingFileError,
    EmbeddingModel,
    backward,
    forward,
    init_xavier,
    load_embeddings,
    save_embeddings,
)


def _one_pair():
    one = (np.array([0]),)
    empty = (np.empty(0, dtype=np.int64),)
    return InteractionDataset(1, 1, one, empty, empty)


def test_single_edge_weight_one():
    adj = build_norm_adjacency(_one_pair())
    assert adj.matrix.toarray().tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_user_with_two_items():
    ds = InteractionDataset(1, 2, (np.array([0, 1]),), (np.empty(0, dtype=np.int64),),
                            (np.empty(0, dtype=np.int64),))
    dense = build_norm_adjacency(ds).matrix.toarray()
    np.testing.assert_allclose(dense[0, 1:], [2 ** -0.5] * 2)
    np.testing.assert_allclose(dense, dense.T)


@pytest.mark.parametrize("seed", range(10))
def test_adjacency_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    ds = random_bipartite(rng, 3, 3, min_one=False)
    adj = build_norm_adjacency(ds)
    dense = adj.matrix.toarray()
    np.testing.assert_allclose(dense, dense_adjacency(ds), rtol=0, atol=1e-15)
    assert np.all(np.diag(dense) == 0)
    assert adj.matrix.nnz == 2 * ds.num_train
    assert np.all((adj.matrix.data > 0) & (adj.matrix.data <= 1))


def test_propagate_swaps_single_pair():
    adj = build_norm_adjacency(_one_pair())
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(propagate(adj, x), x[::-1])
    np.testing.assert_array_equal(propagate(adj, np.zeros((2, 2))), 0)


def test_propagate_dimension_mismatch():
    adj = build_norm_adjacency(_one_pair())
    with pytest.raises(ValueError):
        propagate(adj, np.zeros((3, 2)))


def test_isolated_node_rows_are_zero(rng):
    ds = InteractionDataset(2, 2, (np.array([0]), np.empty(0, dtype=np.int64)),
                            (np.empty(0, dtype=np.int64),) * 2, (np.empty(0, dtype=np.int64),) * 2)
    out = propagate(build_norm_adjacency(ds), rng.standard_normal((4, 3)))
    assert np.all(out[1] == 0) and np.all(out[3] == 0)


@pytest.mark.parametrize("seed", range(5))
def test_propagate_linearity_and_self_adjoint(seed):
    rng = np.random.default_rng(seed)
    ds = random_bipartite(rng, 4, 6)
    adj = build_norm_adjacency(ds)
    X, Y = rng.standard_normal((2, 10, 3))
    a, b = rng.standard_normal(2)
    np.testing.assert_allclose(propagate(adj, a * X + b * Y), a * propagate(adj, X) + b * propagate(adj, Y),
                               atol=1e-12)
    assert np.sum(propagate(adj, X) * Y) == pytest.approx(np.sum(X * propagate(adj, Y)), abs=1e-8)
    np.testing.assert_allclose(propagate(adj, X), dense_adjacency(ds) @ X, atol=1e-12)


def test_xavier_bounds_and_determinism():
    m = init_xavier(4, 5, 3, seed=1)
    assert np.all(np.abs(m.base) <= 1.0)
    np.testing.assert_array_equal(m.base, init_xavier(4, 5, 3, seed=1).base)


def test_xavier_moments():
    m = init_xavier(500, 333, 12, seed=0)
    assert abs(m.base.mean()) < 0.02
    assert m.base.var() == pytest.approx(1 / 12, rel=0.1)


def test_forward_zero_layers_is_identity(rng):
    ds = random_bipartite(rng, 3, 4)
    m = EmbeddingModel(rng.standard_normal((7, 2)), 3, 4, num_layers=0)
    np.testing.assert_array_equal(forward(m, build_norm_adjacency(ds)).final, m.base)


def test_forward_single_pair_one_layer():
    a, b = np.array([1.0, -2.0]), np.array([0.5, 4.0])
    m = EmbeddingModel(np.stack([a, b]), 1, 1, num_layers=1)
    final = forward(m, build_norm_adjacency(_one_pair())).final
    np.testing.assert_allclose(final, [(a + b) / 2, (a + b) / 2])


@pytest.mark.parametrize("seed", range(5))
def test_forward_matches_dense_layer_mean(seed):
    rng = np.random.default_rng(seed)
    ds = random_bipartite(rng, 5, 6)
    adj = build_norm_adjacency(ds)
    m = EmbeddingModel(rng.standard_normal((11, 4)), 5, 6, num_layers=3)
    A = dense_adjacency(ds)
    E = m.base
    expected = (E + A @ E + A @ A @ E + A @ A @ A @ E) / 4
    cached = forward(m, adj, keep_cache=True)
    np.testing.assert_allclose(cached.final, expected, atol=1e-10)
    np.testing.assert_array_equal(cached.final, forward(m, adj).final)
    assert len(cached.layers) == 4
    scaled = EmbeddingModel(2.5 * E, 5, 6, 3)
    np.testing.assert_allclose(forward(scaled, adj).final, 2.5 * cached.final, atol=1e-12)


def test_backward_trivial_cases(rng):
    ds = random_bipartite(rng, 3, 4)
    adj = build_norm_adjacency(ds)
    G = rng.standard_normal((7, 2))
    np.testing.assert_array_equal(backward(G, adj, 0), G)
    np.testing.assert_array_equal(backward(np.zeros((7, 2)), adj, 2), 0)
    with pytest.raises(ValueError):
        backward(np.zeros((6, 2)), adj, 2)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(3)
    ds = random_bipartite(rng, 3, 4)
    adj = build_norm_adjacency(ds)
    base = rng.standard_normal((7, 2))
    C = rng.standard_normal((7, 2))

    def loss(b):
        return float(np.sum(C * forward(EmbeddingModel(b, 3, 4, 2), adj).final))

    analytic = backward(C, adj, 2)
    h = 1e-5
    numeric = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        plus, minus = base.copy(), base.copy()
        plus[idx] += h
        minus[idx] -= h
        numeric[idx] = (loss(plus) - loss(minus)) / (2 * h)
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8)
    assert rel.max() <= 1e-6


def test_backward_is_adjoint_of_forward(rng):
    ds = random_bipartite(rng, 5, 5)
    adj = build_norm_adjacency(ds)
    G, B = rng.standard_normal((2, 10, 3))
    lhs = np.sum(backward(G, adj, 3) * B)
    rhs = np.sum(G * forward(EmbeddingModel(B, 5, 5, 3), adj).final)
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_embedding_file_roundtrip(tmp_path, rng):
    table = rng.standard_normal((7, 5))
    save_embeddings(table, 3, 4, tmp_path / "e.txt")
    back, U, I = load_embeddings(tmp_path / "e.txt")
    assert (U, I) == (3, 4)
    assert np.max(np.abs(back - table)) <= 1e-6
    assert (tmp_path / "e.txt").read_text().splitlines()[0] == "TTEN-EMB 1 3 4 5"


def test_embedding_file_empty(tmp_path):
    save_embeddings(np.zeros((0, 4)), 0, 0, tmp_path / "e.txt")
    back, U, I = load_embeddings(tmp_path / "e.txt")
    assert back.shape == (0, 4) and (U, I) == (0, 0)


def test_embedding_file_dim_mismatch(tmp_path, rng):
    save_embeddings(rng.standard_normal((2, 3)), 1, 1, tmp_path / "e.txt")
    lines = (tmp_path / "e.txt").read_text().splitlines()
    lines[0] = "TTEN-EMB 1 1 1 4"
    (tmp_path / "e.txt").write_text("\n".join(lines) + "\n")
    with pytest.raises(EmbeddingFileError, match="row 0"):
        load_embeddings(tmp_path / "e.txt")


def test_embedding_file_bad_magic(tmp_path):
    (tmp_path / "e.txt").write_text("EMB 1 0 0 2\n")
    with pytest.raises(EmbeddingFileError):
        load_embeddings(tmp_path / "e.txt")
