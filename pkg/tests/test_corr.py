import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentscope.corr import (CCA, PCA, SingularWhiteningError, cca, evr_curve_distance,
                              frames_matrix, pca_evr)
from latentscope.tensor import pearson

from oracles import covariance_eig_ratios


def test_pca_rank_one():
    x = np.array([1.0, 2.0, 4.0, 7.0])
    np.testing.assert_allclose(pca_evr(np.column_stack([x, x])).ratios, [1.0, 0.0], atol=1e-15)


def test_pca_square_symmetry():
    m = np.array([[1, 1], [1, -1], [-1, -1], [-1, 1]], dtype=float)
    np.testing.assert_allclose(pca_evr(m).ratios, [0.5, 0.5], atol=1e-15)


def test_pca_hand_computed():
    # covariance diag(8/3, 2/3)
    m = np.array([[2, 0], [0, 1], [-2, 0], [0, -1]], dtype=float)
    np.testing.assert_allclose(pca_evr(m).ratios, [0.8, 0.2], atol=1e-15)


def test_pca_matches_covariance_eigendecomposition():
    m = np.random.default_rng(0).normal(size=(30, 6)) @ np.random.default_rng(1).normal(size=(6, 6))
    assert np.max(np.abs(pca_evr(m).ratios - covariance_eig_ratios(m))) < 1e-10


def test_pca_padding_when_wide():
    m = np.random.default_rng(2).normal(size=(5, 9))
    r = pca_evr(m).ratios
    assert r.size == 9 and np.all(r[4:] == 0) and np.all(r[:4] > 0)


def test_pca_constant_matrix_rejected():
    with pytest.raises(ValueError):
        pca_evr(np.ones((4, 3)))


matrices = st.tuples(st.integers(3, 12), st.integers(1, 5), st.integers(0, 10_000)).map(
    lambda a: np.random.default_rng(a[2]).normal(size=(a[0], a[1])) * np.arange(1, a[1] + 1))


@settings(max_examples=40, deadline=None)
@given(matrices, st.integers(0, 1000))
def test_pca_invariants(m, seed):
    rng = np.random.default_rng(seed)
    r = pca_evr(m).ratios
    assert np.all(r >= 0) and np.all(np.diff(r) <= 1e-15)
    assert abs(r.sum() - 1) < 1e-9
    perm = rng.permutation(m.shape[1])
    np.testing.assert_allclose(pca_evr(m[:, perm]).ratios, r, atol=1e-10)
    shifted = m + rng.normal(size=m.shape[1]) * 10
    np.testing.assert_allclose(pca_evr(shifted).ratios, r, atol=1e-10)


def test_pca_transform_decorrelates():
    m = np.random.default_rng(3).normal(size=(50, 4)) @ np.random.default_rng(4).normal(size=(4, 4))
    scores = PCA().fit_transform(m)
    c = np.cov(scores, rowvar=False)
    assert np.max(np.abs(c - np.diag(np.diag(c)))) < 1e-10


def test_cca_self_correlation():
    X = np.random.default_rng(5).normal(size=(20, 4))
    np.testing.assert_allclose(cca(X, X, ridge=0.0).correlations, 1.0, atol=1e-9)


def test_cca_affine_univariate():
    x = np.random.default_rng(6).normal(size=(15, 1))
    res = cca(x, -2 * x + 7, ridge=0.0)
    np.testing.assert_allclose(res.correlations, [1.0], atol=1e-12)


def test_univariate_cca_is_abs_pearson():
    x = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([[1.0], [3.0], [2.0], [4.0]])
    assert abs(cca(x, y, ridge=0.0).correlations[0] - 0.8) < 1e-10
    rng = np.random.default_rng(7)
    for _ in range(5):
        a, b = rng.normal(size=(12, 1)), rng.normal(size=(12, 1))
        assert abs(cca(a, b, 0.0).correlations[0] - abs(pearson(a[:, 0], b[:, 0]))) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_cca_affine_invariance_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    n, p, q = 25, 3, 4
    X = rng.normal(size=(n, p))
    Y = X @ rng.normal(size=(p, q)) + rng.normal(size=(n, q))
    base = cca(X, Y, 0.0).correlations
    A = rng.normal(size=(p, p)) + 3 * np.eye(p)
    B = rng.normal(size=(q, q)) + 3 * np.eye(q)
    moved = cca(X @ A + rng.normal(size=p), Y @ B - 4.0, 0.0).correlations
    np.testing.assert_allclose(moved, base, atol=1e-8)
    np.testing.assert_allclose(cca(Y, X, 0.0).correlations, base, atol=1e-10)
    assert np.all(base <= 1 + 1e-9) and np.all(np.diff(base) <= 1e-12)


def test_cca_canonical_variates_realize_correlations():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 3))
    Y = X @ rng.normal(size=(3, 2)) + 0.5 * rng.normal(size=(40, 2))
    model = CCA(ridge=0.0).fit(X, Y)
    u, v = model.transform(X, Y)
    for i, rho in enumerate(model.correlations_):
        assert abs(pearson(u[:, i], v[:, i]) - rho) < 1e-10


def test_cca_rank_deficiency():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(10, 3))
    wide = rng.normal(size=(10, 40))
    with pytest.raises(SingularWhiteningError):
        cca(X, wide, ridge=0.0)
    res = cca(X, wide, ridge=1e-8)
    assert res.effective_rank == 3 and len(res.correlations) == 3
    np.testing.assert_allclose(res.correlations, 1.0, atol=1e-6)


def test_cca_row_mismatch():
    with pytest.raises(ValueError):
        cca(np.zeros((5, 2)), np.zeros((6, 2)))


def test_evr_curve_distance_examples():
    assert evr_curve_distance([0.5, 0.3, 0.2], [0.5, 0.3, 0.2]) == 0.0
    assert evr_curve_distance([1.0], [0.5, 0.5]) == pytest.approx(1.0)
    assert evr_curve_distance([0.8, 0.2], [0.6, 0.3, 0.1]) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        evr_curve_distance([], [1.0])


def test_frames_matrix():
    f = np.arange(24.0).reshape(2, 3, 4)
    m = frames_matrix(f)
    assert m.shape == (2, 12) and np.array_equal(m[1], np.arange(12.0, 24.0))
