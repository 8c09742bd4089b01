import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from oracles import jacobi_svd
from textnet import lsa
from textnet.lsa import ConvergenceError, choose_rank, doc_embeddings, fit, truncated_svd
from textnet.vectorize import build_tfidf_matrix


def random_sparse(seed, m=None, n=None, density=0.3):
    rng = np.random.default_rng(seed)
    m = m or int(rng.integers(5, 41))
    n = n or int(rng.integers(5, 31))
    return sp.random(m, n, density=density, random_state=rng, format="csc")


def test_oracle_agrees_with_lapack():
    A = np.random.default_rng(0).standard_normal((9, 6))
    _, s, _ = jacobi_svd(A)
    np.testing.assert_allclose(s, np.linalg.svd(A, compute_uv=False), rtol=1e-12)


def test_rank_one_exact():
    rng = np.random.default_rng(1)
    X = np.outer(rng.random(7), rng.random(5))
    f = truncated_svd(X, 1, seed=3)
    assert np.abs(f.reconstruct() - X).max() < 1e-8


def test_full_rank_zero_error():
    X = random_sparse(2, 12, 8, density=0.6)
    r = np.linalg.matrix_rank(X.toarray())
    f = truncated_svd(X, r, seed=0)
    assert np.linalg.norm(X.toarray() - f.reconstruct()) < 1e-8


def test_dense_10x8_against_oracle():
    X = np.random.default_rng(5).standard_normal((10, 8))
    f = truncated_svd(X, 3, seed=11)
    _, s, _ = jacobi_svd(X)
    np.testing.assert_allclose(f.singular_values, s[:3], rtol=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_eckart_young(seed):
    X = random_sparse(100 + seed)
    _, s_full, _ = jacobi_svd(X.toarray())
    r = int(np.count_nonzero(s_full > 1e-12 * s_full[0]))
    k = max(1, r // 2)
    f = truncated_svd(X, k, seed=seed)
    np.testing.assert_allclose(f.singular_values, s_full[:k], rtol=1e-6)
    err = np.linalg.norm(X.toarray() - f.reconstruct()) ** 2
    assert err == pytest.approx(float((s_full[k:] ** 2).sum()), rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_orthonormal_and_sorted(seed, k):
    X = random_sparse(seed, 20, 15, density=0.4)
    k = min(k, np.linalg.matrix_rank(X.toarray()))
    f = truncated_svd(X, k, seed=seed)
    eye = np.eye(k)
    assert np.abs(f.term_factors.T @ f.term_factors - eye).max() <= 1e-8
    assert np.abs(f.doc_factors.T @ f.doc_factors - eye).max() <= 1e-8
    assert (f.singular_values > 0).all() and (np.diff(f.singular_values) <= 0).all()
    assert f.k == k <= min(X.shape)


def test_sign_convention():
    f = truncated_svd(random_sparse(7, 20, 12), 4, seed=0)
    T = f.term_factors
    top = T[np.argmax(np.abs(T), axis=0), np.arange(f.k)]
    assert (top > 0).all()


def test_deterministic_for_seed():
    X = random_sparse(8, 30, 20)
    a, b = truncated_svd(X, 5, seed=4), truncated_svd(X, 5, seed=4)
    assert np.array_equal(a.doc_factors, b.doc_factors)
    assert np.array_equal(a.singular_values, b.singular_values)


def test_seed_independent_up_to_tolerance():
    X = random_sparse(9, 30, 20)
    a, b = truncated_svd(X, 4, seed=1), truncated_svd(X, 4, seed=2)
    # canonical signs make factors comparable across sketches
    np.testing.assert_allclose(a.doc_factors, b.doc_factors, atol=1e-7)


def test_k_out_of_range():
    X = random_sparse(3, 10, 6)
    with pytest.raises(ValueError):
        truncated_svd(X, 0)
    with pytest.raises(ValueError):
        truncated_svd(X, 7)


def test_k_beyond_numerical_rank():
    X = np.outer(np.arange(1.0, 6.0), np.arange(1.0, 5.0))
    with pytest.raises(ValueError, match="numerical rank"):
        truncated_svd(X, 2)


def test_convergence_error_carries_iterations():
    # power iteration cannot separate two nearly equal singular values in one step
    X = np.diag([1.0, 1.0 - 1e-9, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05])
    with pytest.raises(ConvergenceError) as info:
        truncated_svd(X, 1, oversample=0, power_iters=0, max_iter=1)
    assert info.value.iterations == 1
    assert info.value.residual > 0


def test_choose_rank_examples():
    assert choose_rank([10, 0, 0], 0.8) == 1
    assert choose_rank([3, 3, 3, 3], 0.5) == 2
    # cumulative shares 25/55, 41/55, 50/55 = 0.909 already reach 0.9 at k = 3
    assert choose_rank([5, 4, 3, 2, 1], 0.9) == 3
    assert choose_rank([5, 4, 3, 2, 1], 0.95) == 4
    assert choose_rank([5, 4, 3, 2, 1], 0.9, cap=2) == 2
    # energy measured against a larger total than the listed values
    assert choose_rank([3, 3], 0.5, total_energy=36.0) == 2


def test_embedding_shapes():
    X = random_sparse(4, 15, 10, density=0.5)
    f = truncated_svd(X, 1)
    assert doc_embeddings(f).shape == (10, 1)


def test_identical_columns_identical_rows():
    X = random_sparse(6, 15, 8, density=0.5).toarray()
    X[:, 5] = X[:, 2]
    E = doc_embeddings(truncated_svd(X, 3))
    np.testing.assert_allclose(E[5], E[2], atol=1e-8)


def test_toy_rank_two_against_oracle(toy_docs):
    X = build_tfidf_matrix(toy_docs).X
    f = truncated_svd(X, 2, seed=0)
    _, _, V = jacobi_svd(X.toarray())
    for j in range(2):
        col, ref = f.doc_factors[:, j], V[:, j]
        sign = np.sign(col @ ref)
        np.testing.assert_allclose(col, sign * ref, atol=1e-8)


def test_fit_energy_rank():
    X = random_sparse(12, 30, 20, density=0.3)
    s_full = np.linalg.svd(X.toarray(), compute_uv=False)
    f = fit(X, energy_fraction=0.8)
    assert f.k == choose_rank(s_full, 0.8)
    assert fit(X, rank=3).k == 3


def test_save_load(tmp_path):
    f = truncated_svd(random_sparse(13, 12, 9, density=0.5), 3)
    ids = [f"d{i}" for i in range(9)]
    lsa.save(f, tmp_path, ids)
    g = lsa.load(tmp_path)
    assert g.k == f.k and np.array_equal(g.doc_factors, f.doc_factors)
    assert (tmp_path / "embeddings.csv").read_text().splitlines()[0] == "doc_id,0,1,2"
