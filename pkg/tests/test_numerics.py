import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvbench.numerics import (
    ConvergenceError,
    NumericError,
    Rng,
    ShapeError,
    SingularityError,
    derive_seed,
    eig_sym,
    finite_diff_grad,
    gauss_sample,
    matmul,
    solve_ols,
)


def triple_loop(a, b):
    out = [[0.0] * len(b[0]) for _ in range(len(a))]
    for i in range(len(a)):
        for j in range(len(b[0])):
            acc = 0.0
            for k in range(len(b)):
                acc += a[i][k] * b[k][j]
            out[i][j] = acc
    return np.array(out)


# --- sampling ---------------------------------------------------------------

def test_gauss_zero_stddev_gives_zeros():
    assert np.all(gauss_sample(Rng(3), 7, 0.0) == 0.0)


def test_gauss_same_seed_bit_identical():
    a = gauss_sample(Rng(42), 4, 1.0)
    b = gauss_sample(Rng(42), 4, 1.0)
    assert a.tobytes() == b.tobytes()


def test_gauss_negative_stddev_rejected():
    with pytest.raises(ValueError):
        gauss_sample(Rng(0), 3, -1.0)


def test_gauss_moments_large_sample():
    x = gauss_sample(Rng(7), 1_000_000, 2.0)
    # standard error of the mean is 2/1000 = 0.002
    assert abs(x.mean()) < 0.01
    assert abs(x.var() / 4.0 - 1.0) < 0.02


def test_derive_seed_is_stable_and_key_sensitive():
    assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
    assert derive_seed(5, 1, 2) != derive_seed(5, 2, 1)
    assert derive_seed(5, 1) != derive_seed(6, 1)


# --- matmul -------------------------------------------------------------------

def test_matmul_identity():
    M = Rng(0).normal((3, 5))
    assert np.array_equal(matmul(np.eye(3), M), M)


def test_matmul_hand_example():
    assert np.array_equal(matmul([[1, 2], [3, 4]], [[0], [1]]), np.array([[2.0], [4.0]]))


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_random_5x7_7x3_matches_loop():
    rng = Rng(1)
    a, b = rng.normal((5, 7)), rng.normal((7, 3))
    np.testing.assert_allclose(matmul(a, b), triple_loop(a.tolist(), b.tolist()), rtol=1e-12, atol=1e-12)


def test_matmul_matches_loop_on_100_random_cases():
    rng = Rng(11)
    for _ in range(100):
        n, k, m = rng.integers(1, 7, 3)
        a, b = rng.normal((n, k)), rng.normal((k, m))
        np.testing.assert_allclose(matmul(a, b), triple_loop(a.tolist(), b.tolist()), rtol=1e-12, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32))
def test_matmul_associative(n, k, m, p, seed):
    rng = Rng(seed)
    a, b, c = rng.normal((n, k)), rng.normal((k, m)), rng.normal((m, p))
    np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), rtol=1e-10, atol=1e-10)


# --- least squares ------------------------------------------------------------

def test_ols_exact_interpolation():
    W = solve_ols(np.eye(4), 2 * np.eye(4))
    np.testing.assert_allclose(W, 2 * np.eye(4), atol=1e-12)


def test_ols_recovers_known_map():
    rng = Rng(2)
    Z, G = rng.normal((50, 4)), rng.normal((3, 4))
    np.testing.assert_allclose(solve_ols(Z, Z @ G.T), G, atol=1e-10)


def test_ols_matches_pseudo_inverse_oracle():
    rng = Rng(3)
    Z, G = rng.normal((200, 4)), rng.normal((4, 4))
    S = Z @ G.T + 0.1 * rng.normal((200, 4))
    oracle = (np.linalg.inv(Z.T @ Z) @ Z.T @ S).T
    np.testing.assert_allclose(solve_ols(Z, S), oracle, atol=1e-8)


def test_ols_intercept_column():
    rng = Rng(4)
    Z = rng.normal((100, 2))
    S = Z @ np.array([[1.0, -2.0]]).T + 3.0
    W = solve_ols(Z, S, with_intercept=True)
    np.testing.assert_allclose(W, [[1.0, -2.0, 3.0]], atol=1e-10)


def test_ols_residual_orthogonal():
    rng = Rng(5)
    Z, S = rng.normal((300, 4)), rng.normal((300, 3))
    W = solve_ols(Z, S)
    resid = S - Z @ W.T
    assert np.max(np.abs(Z.T @ resid)) < 1e-6 * np.max(np.abs(Z.T @ S))


def test_ols_rank_deficient_without_fallback_names_rank():
    Z = np.ones((10, 3))
    with pytest.raises(SingularityError, match="rank 1 of 3"):
        solve_ols(Z, np.ones((10, 1)), ridge_fallback=False)


def test_ols_rank_deficient_with_fallback_is_finite():
    rng = Rng(6)
    z = rng.normal((20, 1))
    Z = np.hstack([z, z])
    W = solve_ols(Z, 2 * z)
    assert np.all(np.isfinite(W))
    np.testing.assert_allclose(Z @ W.T, 2 * z, atol=1e-6)


# --- symmetric eigendecomposition ---------------------------------------------

def test_eig_diagonal():
    vals, V = eig_sym(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(vals, [3, 2, 1], atol=1e-14)
    np.testing.assert_allclose(V, np.eye(3)[:, [0, 2, 1]], atol=1e-14)


def test_eig_2x2_closed_form():
    vals, V = eig_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(vals, [3, 1], atol=1e-12)
    r = 1 / np.sqrt(2)
    np.testing.assert_allclose(np.abs(V[:, 0]), [r, r], atol=1e-12)
    np.testing.assert_allclose(np.abs(V[:, 1]), [r, r], atol=1e-12)
    assert V[0, 1] * V[1, 1] < 0


def test_eig_random_reconstruction():
    A = Rng(8).normal((8, 8))
    M = A + A.T
    vals, V = eig_sym(M)
    np.testing.assert_allclose(V @ np.diag(vals) @ V.T, M, atol=1e-8)


def test_eig_non_square():
    with pytest.raises(ShapeError):
        eig_sym(np.ones((2, 3)))


def test_eig_convergence_error_reports_sweeps():
    A = Rng(9).normal((6, 6))
    with pytest.raises(ConvergenceError, match="1 sweeps"):
        eig_sym(A + A.T, max_sweeps=1)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32))
def test_eig_properties(n, seed):
    A = Rng(seed).normal((n, n))
    M = A + A.T
    vals, V = eig_sym(M)
    scale = max(1.0, np.linalg.norm(M))
    assert np.max(np.abs(V.T @ V - np.eye(n))) < 1e-8
    assert abs(np.trace(M) - vals.sum()) <= 1e-8 * scale
    assert np.all(np.diff(vals) <= 1e-12)
    np.testing.assert_allclose(M @ V, V * vals, atol=1e-8 * scale)
    pivots = np.argmax(np.abs(V), axis=0)
    assert np.all(V[pivots, np.arange(n)] > 0)


def test_eig_agrees_with_lapack():
    A = Rng(10).normal((20, 20))
    M = A @ A.T
    vals, _ = eig_sym(M)
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(M)[::-1], rtol=1e-10)


# --- finite differences -------------------------------------------------------

def test_fd_quadratic():
    g = finite_diff_grad(lambda t: float(t @ t), np.array([1.0, 2.0]), 1e-5)
    np.testing.assert_allclose(g, [2.0, 4.0], atol=1e-6)


def test_fd_constant():
    assert np.all(finite_diff_grad(lambda t: 3.0, np.zeros(4)) == 0)


def test_fd_non_finite():
    with pytest.raises(NumericError):
        finite_diff_grad(lambda t: float("nan"), np.zeros(2))


def test_fd_does_not_mutate_input():
    theta = np.array([0.5, -1.0])
    finite_diff_grad(lambda t: float(np.sum(t**3)), theta)
    assert theta.tolist() == [0.5, -1.0]
