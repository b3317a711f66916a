"""Regularized least squares and the empirical-Bayes objective.

For the linear regression ``Y = Phi theta + V`` with ``V ~ N(0, sigma2 I)``
and prior ``theta ~ N(0, K)``:

* :func:`rls` returns ``K Phi^T (Phi K Phi^T + sigma2 I)^-1 Y``,
* :func:`neg_log_marglik` returns
  ``Y^T S^-1 Y + log det S`` with ``S = Phi K Phi^T + sigma2 I``
  (twice the negative log marginal likelihood up to a constant).

Both pick an ``N x N`` or an ``r x r`` computation, whichever is smaller,
where ``r`` is the column count of a factor ``L`` with ``K = L L^T``. The
reduced route only needs the sufficient statistics ``Phi^T Phi``,
``Phi^T Y`` and ``Y^T Y``, which is what the hyperparameter tuners reuse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import DataTooShortError, DomainError, NumericalError
from .kernels import psd_factor
from .lti import build_fir_regressor

__all__ = [
    "RegressionStats",
    "rls",
    "rls_from_factor",
    "ls",
    "neg_log_marglik",
    "marglik_from_factor",
    "estimate_sigma2",
]


@dataclass(frozen=True, eq=False)
class RegressionStats:
    """Sufficient statistics of a regression problem."""

    N: int
    gram: np.ndarray  # Phi^T Phi
    cross: np.ndarray  # Phi^T Y
    yy: float  # Y^T Y

    @classmethod
    def from_data(cls, Phi, Y) -> "RegressionStats":
        Phi = np.asarray(Phi, dtype=float)
        Y = np.asarray(Y, dtype=float).ravel()
        return cls(Phi.shape[0], Phi.T @ Phi, Phi.T @ Y, float(Y @ Y))

    def project(self, B) -> "RegressionStats":
        """Statistics of the regressor ``Phi @ B``."""
        return RegressionStats(self.N, B.T @ self.gram @ B, B.T @ self.cross, self.yy)


def _check_sigma2(sigma2):
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be > 0, got {sigma2}")


def _as_problem(Phi, Y):
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    Y = np.asarray(Y, dtype=float).ravel()
    if Phi.shape[0] != Y.size:
        raise ValueError(f"Phi has {Phi.shape[0]} rows but Y has {Y.size} entries")
    return Phi, Y


def _reduced_system(stats: RegressionStats, L, sigma2):
    L = np.asarray(L, dtype=float)
    M = L.T @ stats.gram @ L
    S = M + sigma2 * np.eye(M.shape[0])
    try:
        R = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("reduced system is not positive definite") from exc
    return L, R, L.T @ stats.cross


def rls_from_factor(stats: RegressionStats, L, sigma2: float) -> np.ndarray:
    """RLS estimate given a kernel factor, using only sufficient statistics."""
    _check_sigma2(sigma2)
    L, R, b = _reduced_system(stats, L, sigma2)
    z = solve_triangular(R, b, lower=True)
    return L @ solve_triangular(R.T, z, lower=False)


def marglik_from_factor(stats: RegressionStats, L, sigma2: float) -> float:
    """Empirical-Bayes objective given a kernel factor ``L`` (``n x r``).

    Uses ``det(sigma2 I_N + A A^T) = sigma2^(N-r) det(sigma2 I_r + A^T A)``
    and the matrix inversion lemma with ``A = Phi L``.
    """
    _check_sigma2(sigma2)
    L, R, b = _reduced_system(stats, L, sigma2)
    r = L.shape[1]
    z = solve_triangular(R, b, lower=True)
    quad = (stats.yy - z @ z) / sigma2
    logdet = (stats.N - r) * np.log(sigma2) + 2.0 * np.sum(np.log(np.diag(R)))
    val = float(quad + logdet)
    if not np.isfinite(val):
        raise NumericalError(f"objective is not finite (quad={quad}, logdet={logdet})")
    return val


def rls(Phi, Y, K, sigma2: float, factor=None) -> np.ndarray:
    """Regularized least squares estimate ``K Phi^T (Phi K Phi^T + sigma2 I)^-1 Y``.

    ``K`` may be singular. When ``N`` does not exceed the factor rank the
    ``N x N`` form is solved directly and ``K`` is never factored; otherwise
    ``K`` is factored with :func:`psd_factor` (or ``factor`` is used).
    """
    _check_sigma2(sigma2)
    Phi, Y = _as_problem(Phi, Y)
    N, n = Phi.shape
    K = np.asarray(K, dtype=float)
    if K.shape != (n, n):
        raise ValueError(f"K must be {n}x{n}")
    r = n if factor is None else np.shape(factor)[1]
    if N <= r:
        S = Phi @ K @ Phi.T + sigma2 * np.eye(N)
        try:
            return K @ (Phi.T @ cho_solve(cho_factor(S, lower=True), Y))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("N x N system is not positive definite") from exc
    L = psd_factor(K)[0] if factor is None else factor
    return rls_from_factor(RegressionStats.from_data(Phi, Y), L, sigma2)


def ls(Phi, Y) -> np.ndarray:
    """Minimum-norm least squares with relative rank tolerance 1e-10."""
    Phi, Y = _as_problem(Phi, Y)
    return np.linalg.lstsq(Phi, Y, rcond=1e-10)[0]


def neg_log_marglik(Phi, Y, K, sigma2: float, factor=None, form: str = "auto") -> float:
    """``Y^T S^-1 Y + log det S`` with ``S = Phi K Phi^T + sigma2 I``.

    ``form`` is ``"direct"`` (factor the ``N x N`` matrix), ``"reduced"``
    (factor ``K`` and work in its column space) or ``"auto"`` (smaller of the
    two).
    """
    _check_sigma2(sigma2)
    Phi, Y = _as_problem(Phi, Y)
    N, n = Phi.shape
    K = np.asarray(K, dtype=float)
    if form == "auto":
        r = n if factor is None else np.shape(factor)[1]
        form = "direct" if N <= r else "reduced"
    if form == "direct":
        S = Phi @ K @ Phi.T + sigma2 * np.eye(N)
        try:
            c, low = cho_factor(S, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("N x N system is not positive definite") from exc
        val = float(Y @ cho_solve((c, low), Y) + 2.0 * np.sum(np.log(np.diag(c))))
        if not np.isfinite(val):
            raise NumericalError("objective is not finite")
        return val
    if form != "reduced":
        raise ValueError(f"unknown form {form!r}")
    L = psd_factor(K)[0] if factor is None else factor
    return marglik_from_factor(RegressionStats.from_data(Phi, Y), L, sigma2)


def estimate_sigma2(u, y, n_fir: int = 125) -> float:
    """Noise variance from the residual of a least-squares FIR fit.

    For records with ``N <= 250`` the FIR order is capped at ``N // 2``.
    """
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    N = y.size
    if N <= 250:
        n_fir = min(n_fir, N // 2)
    if n_fir < 1 or N <= n_fir:
        raise DataTooShortError(f"N={N} is too short for an FIR({n_fir}) noise estimate")
    Phi = build_fir_regressor(u, N, n_fir)
    resid = y - Phi @ ls(Phi, y)
    return float(resid @ resid) / (N - n_fir)
