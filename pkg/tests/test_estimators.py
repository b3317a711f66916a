import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regsysid.errors import DataTooShortError, DomainError
from regsysid.estimators import (RegressionStats, estimate_sigma2, ls, marglik_from_factor,
                                 neg_log_marglik, rls)
from regsysid.kernels import KernelSpec, kernel_factor, kernel_matrix
from regsysid.lti import build_fir_regressor
from regsysid.tuning import Dim, tune_hyperparameters


def dense_posterior_mean(Phi, Y, K, sigma2):
    """Literal K Phi^T (Phi K Phi^T + sigma2 I)^-1 Y with a generic inverse."""
    S = Phi @ K @ Phi.T + sigma2 * np.eye(Phi.shape[0])
    return K @ Phi.T @ np.linalg.inv(S) @ Y


def dense_objective(Phi, Y, K, sigma2):
    S = Phi @ K @ Phi.T + sigma2 * np.eye(Phi.shape[0])
    return float(Y @ np.linalg.inv(S) @ Y + np.linalg.slogdet(S)[1])


def random_pd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + 0.1 * np.eye(n)


@pytest.mark.parametrize("c,y", [(1.0, 2.0), (3.0, -1.5), (0.01, 7.0)])
def test_rls_scalar(c, y):
    assert rls([[1.0]], [y], [[c]], 1.0)[0] == pytest.approx(c * y / (c + 1), rel=1e-14)


def test_rls_zero_kernel():
    rng = np.random.default_rng(0)
    Phi = rng.standard_normal((20, 5))
    np.testing.assert_array_equal(rls(Phi, rng.standard_normal(20), np.zeros((5, 5)), 0.3),
                                  np.zeros(5))


@pytest.mark.parametrize("seed", range(10))
def test_rls_matches_dense_formula(seed):
    rng = np.random.default_rng(seed)
    Phi = rng.standard_normal((30, 10))
    Y = rng.standard_normal(30)
    K = random_pd(rng, 10)
    ref = dense_posterior_mean(Phi, Y, K, 0.7)
    np.testing.assert_allclose(rls(Phi, Y, K, 0.7), ref, rtol=1e-9, atol=1e-12 * np.abs(ref).max())


@pytest.mark.parametrize("N,n", [(8, 20), (40, 15)])
def test_rls_routes_agree_with_singular_kernel(N, n):
    rng = np.random.default_rng(N)
    Phi = rng.standard_normal((N, n))
    Y = rng.standard_normal(N)
    B = rng.standard_normal((n, 3))
    K = B @ B.T
    ref = dense_posterior_mean(Phi, Y, K, 0.5)
    np.testing.assert_allclose(rls(Phi, Y, K, 0.5, factor=B), ref, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(rls(Phi, Y, K, 0.5), ref, rtol=1e-7, atol=1e-9)


def test_rls_rejects_nonpositive_sigma2():
    with pytest.raises(DomainError):
        rls([[1.0]], [1.0], [[1.0]], 0.0)


def test_ls_identity_and_consistent():
    Y = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(ls(np.eye(3), Y), Y, atol=1e-15)
    rng = np.random.default_rng(1)
    Phi = rng.standard_normal((50, 4))
    theta = np.array([1.0, -0.5, 2.0, 0.25])
    np.testing.assert_allclose(ls(Phi, Phi @ theta), theta, atol=1e-12)


def test_rls_ridge_limit_is_ls():
    rng = np.random.default_rng(2)
    Phi = rng.standard_normal((60, 6))
    Y = rng.standard_normal(60)
    ref = ls(Phi, Y)
    np.testing.assert_allclose(rls(Phi, Y, 1e12 * np.eye(6), 1.0), ref, rtol=1e-4)


@pytest.mark.parametrize("c", [0.5, 3.0, 10.0])
def test_marglik_scalar(c):
    assert neg_log_marglik([[1.0]], [2.0], [[c]], 1.0) == pytest.approx(
        4 / (1 + c) + math.log(1 + c), rel=1e-13)


def test_marglik_scalar_optimum_via_tuner():
    res = tune_hyperparameters(lambda v: neg_log_marglik([[1.0]], [2.0], [[v["c"]]], 1.0),
                               [Dim("c", 1e-3, 1e3, "log")])
    assert abs(res.values["c"] - 3.0) <= 0.05


def test_marglik_zero_kernel():
    rng = np.random.default_rng(3)
    Phi = rng.standard_normal((12, 4))
    Y = rng.standard_normal(12)
    s2 = 0.8
    expected = Y @ Y / s2 + 12 * math.log(s2)
    for form in ("direct", "reduced"):
        assert neg_log_marglik(Phi, Y, np.zeros((4, 4)), s2, form=form) == pytest.approx(
            expected, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), N=st.integers(2, 60), n=st.integers(1, 30),
       sigma2=st.floats(1e-3, 10.0))
def test_marglik_direct_equals_reduced(seed, N, n, sigma2):
    rng = np.random.default_rng(seed)
    Phi = rng.standard_normal((N, n))
    Y = rng.standard_normal(N)
    K = kernel_matrix(KernelSpec("TC", [float(rng.uniform(0.1, 5)), float(rng.uniform(0.2, 0.95))]), n)
    d = neg_log_marglik(Phi, Y, K, sigma2, form="direct")
    r = neg_log_marglik(Phi, Y, K, sigma2, form="reduced")
    assert r == pytest.approx(d, rel=1e-8, abs=1e-8)
    assert d == pytest.approx(dense_objective(Phi, Y, K, sigma2), rel=1e-8, abs=1e-8)


def test_marglik_from_projected_stats():
    rng = np.random.default_rng(4)
    Phi = rng.standard_normal((50, 20))
    Y = rng.standard_normal(50)
    B = rng.standard_normal((20, 4))
    st = RegressionStats.from_data(Phi, Y).project(B)
    direct = RegressionStats.from_data(Phi @ B, Y)
    np.testing.assert_allclose(st.gram, direct.gram, rtol=1e-12)
    L = kernel_factor(KernelSpec("SI", [2.0]), 4)
    assert marglik_from_factor(st, L, 0.5) == pytest.approx(
        dense_objective(Phi @ B, Y, 2 * np.eye(4), 0.5), rel=1e-10)


def fir_data(rng, N, sigma, taps=10):
    u = rng.standard_normal(N)
    g = rng.standard_normal(taps)
    y0 = build_fir_regressor(u, N, taps) @ g
    return u, y0, y0 + sigma * rng.standard_normal(N)


def test_sigma2_noise_free_fir():
    u, y0, _ = fir_data(np.random.default_rng(5), 400, 0.0)
    assert estimate_sigma2(u, y0) <= 1e-12


def test_sigma2_monte_carlo_mean():
    rng = np.random.default_rng(6)
    vals = [estimate_sigma2(*fir_data(rng, 500, math.sqrt(0.5))[::2]) for _ in range(40)]
    assert abs(np.mean(vals) - 0.5) <= 0.15 * 0.5


def test_sigma2_scales_with_noise_power():
    rng = np.random.default_rng(7)
    u = rng.standard_normal(500)
    y0 = build_fir_regressor(u, 500, 10) @ rng.standard_normal(10)
    e = rng.standard_normal(500)
    s1 = estimate_sigma2(u, y0 + 0.3 * e)
    s2 = estimate_sigma2(u, y0 + 0.6 * e)
    # The residual projector is the same, so the ratio is exactly 4.
    assert s2 / s1 == pytest.approx(4.0, rel=1e-9)


def test_sigma2_short_records():
    rng = np.random.default_rng(8)
    assert estimate_sigma2(rng.standard_normal(100), rng.standard_normal(100)) > 0
    with pytest.raises(DataTooShortError):
        estimate_sigma2([1.0], [1.0])
    with pytest.raises(DataTooShortError):
        estimate_sigma2(np.ones(300), np.ones(300), n_fir=300)
