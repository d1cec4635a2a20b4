"""Sparse precision estimation from residual covariances.

Estimates Omega by minimizing

    tr(S Omega) - log|Omega| + lam_omega * sum_{k != k'} |omega_kk'|

with an unpenalized diagonal.  The solve itself is delegated to
scikit-learn's coordinate-descent routine for this exact objective; this
module owns the contracts around it: input validation, degenerate-S
stabilization, the lam_omega = 0 path, and the stationarity certificate.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.covariance import graphical_lasso as _sk_graphical_lasso
from sklearn.exceptions import ConvergenceWarning

from .core import PrecisionMatrix, as_design, as_response, _freeze
from .exceptions import ConformanceError, DefinitenessError, NumericalError

GLASSO_TOL = 1e-6
GLASSO_MAX_ITER = 200


@dataclass(frozen=True, repr=False)
class CovarianceEstimate:
    """Residual covariance S (q-by-q, PSD up to rounding) and its sample size."""

    values: np.ndarray
    n: int

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ConformanceError(f"covariance must be square, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ConformanceError("covariance contains non-finite entries")
        scale = max(1.0, float(np.abs(v).max()))
        if np.abs(v - v.T).max() > 1e-10 * scale:
            raise ConformanceError("covariance is not symmetric")
        if (np.diag(v) < -1e-12 * scale).any():
            raise ConformanceError("covariance has a negative diagonal entry")
        if self.n < 1:
            raise ConformanceError("sample size must be at least 1")

    @property
    def q(self):
        return self.values.shape[0]

    def __repr__(self):
        return f"CovarianceEstimate(q={self.q}, n={self.n})"


def residual_covariance(X, Y, B):
    """S = (Y - XB)'(Y - XB) / n for the current coefficients."""
    X, Y = as_design(X), as_response(Y)
    Bv = B.values if hasattr(B, "values") else np.asarray(B, dtype=np.float64)
    if Bv.shape != (X.p, Y.q) or X.n != Y.n:
        raise ConformanceError("X, Y, and B do not conform")
    R = Y.values - X.values @ Bv
    S = (R.T @ R) / X.n
    S = (S + S.T) / 2.0
    return CovarianceEstimate(S, X.n)


def _as_cov_values(S):
    if isinstance(S, CovarianceEstimate):
        return np.array(S.values)
    S = np.asarray(S, dtype=np.float64)
    return np.array(CovarianceEstimate(S, 1).values)


def jitter_value(S):
    return 1e-8 * float(np.mean(np.diag(S) + 1.0))


def needs_jitter(S):
    """True when a diagonal entry is too close to zero for a stable solve."""
    d = np.diag(S)
    return bool(d.min() <= 1e-12 * max(1.0, float(d.max())))


def stabilize_covariance(S):
    """Add a small diagonal jitter to a degenerate S; returns (S', jitter)."""
    values = _as_cov_values(S)
    if not needs_jitter(values):
        return S, 0.0
    jit = jitter_value(values)
    out = values + jit * np.eye(values.shape[0])
    if isinstance(S, CovarianceEstimate):
        return CovarianceEstimate(out, S.n), jit
    return out, jit


def glasso_solve(S, lam_omega, tol=GLASSO_TOL, max_iter=GLASSO_MAX_ITER):
    """Penalized precision estimate for the covariance S.

    ``lam_omega = 0`` requires S to be positive definite and returns its
    inverse.  For positive levels the coordinate-descent solve runs to a
    duality gap below ``tol``.
    """
    values = _as_cov_values(S)
    if not (lam_omega >= 0) or not np.isfinite(lam_omega):
        raise ConformanceError("lam_omega must be finite and non-negative")
    if needs_jitter(values):
        values = values + jitter_value(values) * np.eye(values.shape[0])
    if lam_omega == 0.0:
        try:
            np.linalg.cholesky(values)
        except np.linalg.LinAlgError:
            raise DefinitenessError(
                "lam_omega = 0 needs a positive definite covariance"
            ) from None
        omega = np.linalg.inv(values)
        return PrecisionMatrix((omega + omega.T) / 2.0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            _, omega = _sk_graphical_lasso(
                values, alpha=float(lam_omega), mode="cd", tol=tol, max_iter=max_iter
            )
    except FloatingPointError as exc:
        raise NumericalError(f"precision solve failed: {exc}") from exc
    if not np.isfinite(omega).all():
        raise NumericalError("precision solve produced non-finite entries")
    omega = (omega + omega.T) / 2.0
    try:
        return PrecisionMatrix(omega)
    except DefinitenessError as exc:
        raise NumericalError(f"precision solve left the PD cone: {exc}") from exc


def glasso_kkt_check(S, Omega, lam_omega):
    """Largest stationarity violation of Omega for covariance S.

    Checks |(inv(Omega) - S)_kk'| <= lam_omega off the diagonal with sign
    consistency on the non-zeros, and exact diagonal agreement.
    """
    values = _as_cov_values(S)
    Om = Omega.values if isinstance(Omega, PrecisionMatrix) else np.asarray(Omega, dtype=np.float64)
    if Om.shape != values.shape:
        raise ConformanceError("Omega and S shapes differ")
    W = np.linalg.inv(Om)
    W = (W + W.T) / 2.0
    diff = W - values
    q = values.shape[0]
    off = ~np.eye(q, dtype=bool)
    viol = np.abs(np.diag(diff)).max() if q else 0.0
    zero = off & (Om == 0.0)
    if zero.any():
        viol = max(viol, float(np.clip(np.abs(diff[zero]) - lam_omega, 0.0, None).max()))
    nz = off & (Om != 0.0)
    if nz.any():
        viol = max(viol, float(np.abs(-diff[nz] + lam_omega * np.sign(Om[nz])).max()))
    return float(viol)


def lambda_omega_grid(S, points=20, span=1e-3):
    """Descending geometric grid anchored at the largest |off-diagonal| of S."""
    values = _as_cov_values(S)
    q = values.shape[0]
    if q == 1:
        return np.array([0.0])
    off = ~np.eye(q, dtype=bool)
    top = float(np.abs(values[off]).max())
    if top <= 0.0:
        return np.array([0.0])
    return np.geomspace(top, top * span, points)
