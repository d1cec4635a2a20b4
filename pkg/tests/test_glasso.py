import numpy as np
import numpy.testing as npt
import pytest

from glcov.exceptions import ConformanceError, DefinitenessError
from glcov.glasso import (
    CovarianceEstimate,
    glasso_kkt_check,
    glasso_solve,
    lambda_omega_grid,
    residual_covariance,
    stabilize_covariance,
)

from oracles import naive_residual_cov


def random_covariance(rng, q=5, n=40):
    A = rng.standard_normal((n, q))
    S = (A.T @ A) / n
    return (S + S.T) / 2


def test_residual_covariance_zero_residual():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 3))
    B = rng.standard_normal((3, 4))
    S = residual_covariance(X, X @ B, B)
    npt.assert_array_equal(S.values, 0.0)
    assert S.n == 20


def test_residual_covariance_orthogonal_identity():
    rng = np.random.default_rng(1)
    n, q = 36, 3
    Q, _ = np.linalg.qr(rng.standard_normal((n, q)))
    Y = Q * np.sqrt(n)
    X = rng.standard_normal((n, 2))
    S = residual_covariance(X, Y, np.zeros((2, q)))
    npt.assert_allclose(S.values, np.eye(q), atol=1e-12)


def test_residual_covariance_matches_naive_loop():
    rng = np.random.default_rng(2)
    for _ in range(10):
        X = rng.standard_normal((15, 4))
        B = rng.standard_normal((4, 3))
        Y = X @ B + rng.standard_normal((15, 3))
        S = residual_covariance(X, Y, B * 0.5)
        expected = naive_residual_cov(X, Y, B * 0.5)
        assert np.abs(S.values - expected).max() < 1e-12


def test_covariance_estimate_validation():
    with pytest.raises(ConformanceError):
        CovarianceEstimate(np.array([[1.0, 0.5], [0.4, 1.0]]), 10)
    with pytest.raises(ConformanceError):
        CovarianceEstimate(np.array([[-1.0, 0.0], [0.0, 1.0]]), 10)
    with pytest.raises(ConformanceError):
        CovarianceEstimate(np.array([[np.inf, 0.0], [0.0, 1.0]]), 10)
    with pytest.raises(ConformanceError):
        CovarianceEstimate(np.eye(2), 0)
    with pytest.raises(ConformanceError):
        residual_covariance(np.ones((5, 2)), np.ones((5, 2)), np.zeros((3, 2)))


def test_glasso_diagonal_covariance_any_level():
    D = np.diag([0.5, 1.3, 2.2])
    for lam in (0.01, 0.5, 5.0):
        Om = glasso_solve(D, lam)
        npt.assert_allclose(Om.values, np.diag(1.0 / np.diag(D)), atol=1e-8)
        assert glasso_kkt_check(D, Om, lam) < 1e-10


def test_glasso_two_by_two_threshold_gives_identity():
    for s in (0.3, 0.6, -0.4):
        S = np.array([[1.0, s], [s, 1.0]])
        for lam in (abs(s), abs(s) + 0.2):
            Om = glasso_solve(S, lam)
            npt.assert_allclose(Om.values, np.eye(2), atol=1e-8)
            assert glasso_kkt_check(S, Om, lam) < 1e-8


def test_glasso_unpenalized_inverse():
    rng = np.random.default_rng(3)
    S = random_covariance(rng, q=2, n=30)
    Om = glasso_solve(S, 0.0)
    npt.assert_allclose(Om.values, np.linalg.inv(S), atol=1e-8)
    assert glasso_kkt_check(S, Om, 0.0) < 1e-10


def test_glasso_unpenalized_requires_positive_definite():
    S = np.ones((3, 3))
    with pytest.raises(DefinitenessError):
        glasso_solve(S, 0.0)


def test_glasso_rejects_bad_level():
    S = np.eye(2)
    with pytest.raises(ConformanceError):
        glasso_solve(S, -0.1)
    with pytest.raises(ConformanceError):
        glasso_solve(S, np.inf)


def test_glasso_output_symmetric_positive_definite():
    rng = np.random.default_rng(4)
    for _ in range(5):
        S = random_covariance(rng)
        Om = glasso_solve(S, 0.05)
        npt.assert_allclose(Om.values, Om.values.T, atol=1e-12)
        assert np.linalg.eigvalsh(Om.values).min() > 0


def test_glasso_converged_kkt_certificate():
    rng = np.random.default_rng(5)
    S = random_covariance(rng)
    for lam in (0.02, 0.1, 0.3):
        Om = glasso_solve(S, lam)
        assert glasso_kkt_check(S, Om, lam) < 1e-4


def test_glasso_sparsity_monotone_in_level():
    rng = np.random.default_rng(6)
    S = random_covariance(rng)
    grid = lambda_omega_grid(S)
    counts = [
        int(np.count_nonzero(np.triu(glasso_solve(S, float(lam)).values, 1)))
        for lam in grid
    ]
    # grid is descending, so counts may only grow along it
    assert all(a <= b for a, b in zip(counts, counts[1:]))
    assert counts[0] == 0


def test_glasso_permutation_equivariance():
    rng = np.random.default_rng(7)
    S = random_covariance(rng)
    perm = np.array([2, 0, 4, 1, 3])
    P = np.eye(5)[perm]
    Om = glasso_solve(S, 0.05).values
    Om_perm = glasso_solve(P @ S @ P.T, 0.05).values
    npt.assert_allclose(P @ Om @ P.T, Om_perm, atol=1e-5)


def test_stabilize_covariance_degenerate_diagonal():
    S = np.zeros((3, 3))
    fixed, jit = stabilize_covariance(S)
    assert jit > 0
    npt.assert_allclose(np.diag(fixed), jit)
    healthy = np.eye(3)
    same, none = stabilize_covariance(healthy)
    assert none == 0.0
    npt.assert_array_equal(same, healthy)
    est = CovarianceEstimate(np.zeros((2, 2)), 12)
    fixed_est, jit_est = stabilize_covariance(est)
    assert isinstance(fixed_est, CovarianceEstimate)
    assert fixed_est.n == 12
    assert jit_est > 0
    Om = glasso_solve(fixed_est, 0.01)
    assert np.isfinite(Om.values).all()


def test_lambda_omega_grid_shape_and_anchor():
    rng = np.random.default_rng(8)
    S = random_covariance(rng)
    grid = lambda_omega_grid(S)
    assert grid.shape == (20,)
    off = ~np.eye(5, dtype=bool)
    top = np.abs(S[off]).max()
    assert grid[0] == pytest.approx(top, rel=1e-12)
    assert grid[-1] == pytest.approx(top * 1e-3, rel=1e-12)
    assert (np.diff(grid) < 0).all()


def test_lambda_omega_grid_degenerate_cases():
    npt.assert_array_equal(lambda_omega_grid(np.array([[2.0]])), [0.0])
    npt.assert_array_equal(lambda_omega_grid(np.eye(3)), [0.0])


def test_glasso_kkt_check_shape_mismatch():
    with pytest.raises(ConformanceError):
        glasso_kkt_check(np.eye(3), np.eye(2), 0.1)
