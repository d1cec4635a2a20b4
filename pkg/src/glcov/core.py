"""Domain types and the error-covariance-weighted regression loss.

The model throughout is Y = X B + E with X an n-by-p design, Y an n-by-q
response panel, and the rows of E drawn from a centered q-variate normal
with precision matrix Omega.  Coefficient cells (i, k) are partitioned
into groups that are penalized together.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConformanceError, DefinitenessError

SYMMETRY_TOL = 1e-10


def _freeze(values, dtype=np.float64):
    out = np.array(values, dtype=dtype, order="C", copy=True)
    out.setflags(write=False)
    return out


def _require_matrix(values, name):
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise ConformanceError(f"{name} must be a 2-d matrix, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise ConformanceError(f"{name} contains non-finite entries")


@dataclass(frozen=True, repr=False)
class DesignMatrix:
    """n-by-p predictor matrix; columns are kept on their raw scale."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        _require_matrix(self.values, "design matrix")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    def column_sq_norms(self):
        return np.einsum("ij,ij->j", self.values, self.values)

    def __repr__(self):
        return f"DesignMatrix(n={self.n}, p={self.p})"


@dataclass(frozen=True, repr=False)
class ResponseMatrix:
    """n-by-q response panel, one column per response series."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        _require_matrix(self.values, "response matrix")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def q(self):
        return self.values.shape[1]

    def __repr__(self):
        return f"ResponseMatrix(n={self.n}, q={self.q})"


@dataclass(frozen=True, repr=False)
class GroupPartition:
    """Partition of the p-by-q coefficient cells into K disjoint groups.

    ``labels[i, k]`` is the 0-based group id of cell (i, k).  Every id in
    ``0..K-1`` must be used at least once, so groups are non-empty and the
    group sizes sum to p*q.
    """

    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64, order="C", copy=True)
        if labels.ndim != 2 or labels.shape[0] < 1 or labels.shape[1] < 1:
            raise ConformanceError(f"group labels must be 2-d, got shape {labels.shape}")
        if labels.min() < 0:
            raise ConformanceError("group ids must be non-negative")
        n_groups = int(labels.max()) + 1
        counts = np.bincount(labels.ravel(), minlength=n_groups)
        if (counts == 0).any():
            missing = int(np.flatnonzero(counts == 0)[0])
            raise ConformanceError(f"group id {missing} has no cells")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_n_groups", n_groups)
        object.__setattr__(self, "_sizes", counts)
        rows, cols = [], []
        flat = labels.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[order], np.arange(n_groups + 1))
        q = labels.shape[1]
        for j in range(n_groups):
            cells = order[bounds[j]:bounds[j + 1]]
            rows.append(cells // q)
            cols.append(cells % q)
        object.__setattr__(self, "_rows", tuple(rows))
        object.__setattr__(self, "_cols", tuple(cols))

    @classmethod
    def singleton(cls, p, q):
        """One group per cell, giving the plain (non-grouped) penalty."""
        return cls(np.arange(p * q, dtype=np.int64).reshape(p, q))

    @classmethod
    def var_lags(cls, q, lags=2):
        """Group the lag coefficients of one series within one equation.

        For a design whose row is (y[t-1], ..., y[t-lags]) stacked, cell
        (i + l*q, k) holds lag l+1 of series i in equation k; all lags of a
        (series, equation) pair form one group of size ``lags``.
        """
        base = np.arange(q * q, dtype=np.int64).reshape(q, q)
        return cls(np.vstack([base] * lags))

    @property
    def shape(self):
        return self.labels.shape

    @property
    def n_groups(self):
        return self._n_groups

    @property
    def sizes(self):
        return self._sizes

    def cells(self, j):
        """Row and column index arrays of group j."""
        return self._rows[j], self._cols[j]

    def __repr__(self):
        p, q = self.labels.shape
        return f"GroupPartition(p={p}, q={q}, n_groups={self.n_groups})"


@dataclass(frozen=True, repr=False)
class GroupedCoefficients:
    """p-by-q coefficient matrix together with its group partition."""

    values: np.ndarray
    partition: GroupPartition

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        _require_matrix(self.values, "coefficient matrix")
        if self.values.shape != self.partition.shape:
            raise ConformanceError(
                f"coefficients {self.values.shape} do not match partition {self.partition.shape}"
            )

    @property
    def p(self):
        return self.values.shape[0]

    @property
    def q(self):
        return self.values.shape[1]

    def group_norms(self):
        """Euclidean norm of every group, as a length-K array."""
        sq = np.bincount(
            self.partition.labels.ravel(),
            weights=(self.values**2).ravel(),
            minlength=self.partition.n_groups,
        )
        return np.sqrt(sq)

    def group_norm(self, j):
        rows, cols = self.partition.cells(j)
        return float(np.linalg.norm(self.values[rows, cols]))

    def __repr__(self):
        return f"GroupedCoefficients(p={self.p}, q={self.q}, n_groups={self.partition.n_groups})"


@dataclass(frozen=True, repr=False)
class PrecisionMatrix:
    """Symmetric positive definite q-by-q error precision matrix."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        _require_matrix(self.values, "precision matrix")
        q0, q1 = self.values.shape
        if q0 != q1:
            raise ConformanceError(f"precision matrix must be square, got {self.values.shape}")
        scale = max(1.0, float(np.abs(self.values).max()))
        if np.abs(self.values - self.values.T).max() > SYMMETRY_TOL * scale:
            raise ConformanceError("precision matrix is not symmetric")
        try:
            chol = np.linalg.cholesky(self.values)
        except np.linalg.LinAlgError:
            raise DefinitenessError("precision matrix is not positive definite") from None
        object.__setattr__(self, "_log_det", 2.0 * float(np.log(np.diag(chol)).sum()))

    @classmethod
    def identity(cls, q):
        return cls(np.eye(q))

    @property
    def q(self):
        return self.values.shape[0]

    def log_det(self):
        return self._log_det

    def diagonal(self):
        return np.diag(self.values)

    def __repr__(self):
        return f"PrecisionMatrix(q={self.q})"


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty levels: a global lam, per-group weights, and lam_omega.

    ``group_weights[j]`` multiplies ``sizes[j] * ||B_j||_2`` in the
    objective; a weight of +inf excludes the group outright.  ``lam_omega``
    scales the absolute off-diagonal precision penalty.
    """

    lam: float
    group_weights: np.ndarray
    lam_omega: float = 0.0

    def __post_init__(self):
        weights = np.asarray(self.group_weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size < 1:
            raise ConformanceError("group weights must be a 1-d array")
        if np.isnan(weights).any() or (weights < 0).any():
            raise ConformanceError("group weights must be non-negative")
        object.__setattr__(self, "group_weights", _freeze(weights))
        if not (self.lam >= 0) or not (self.lam_omega >= 0):
            raise ConformanceError("penalty levels must be non-negative")

    def n_groups(self):
        return self.group_weights.size


def as_design(X):
    return X if isinstance(X, DesignMatrix) else DesignMatrix(np.asarray(X, dtype=np.float64))


def as_response(Y):
    return Y if isinstance(Y, ResponseMatrix) else ResponseMatrix(np.asarray(Y, dtype=np.float64))


def as_precision(Omega):
    return Omega if isinstance(Omega, PrecisionMatrix) else PrecisionMatrix(np.asarray(Omega, dtype=np.float64))


def as_coefficients(B, partition):
    if isinstance(B, GroupedCoefficients):
        return B
    return GroupedCoefficients(np.asarray(B, dtype=np.float64), partition)


def _conform(B, Omega, X, Y):
    X, Y, Omega = as_design(X), as_response(Y), as_precision(Omega)
    if isinstance(B, GroupedCoefficients):
        Bv = B.values
    else:
        Bv = np.asarray(B, dtype=np.float64)
    if Bv.shape != (X.p, Y.q):
        raise ConformanceError(f"coefficients {Bv.shape} do not conform to X ({X.n}x{X.p}) and Y ({Y.n}x{Y.q})")
    if X.n != Y.n:
        raise ConformanceError(f"X has {X.n} rows but Y has {Y.n}")
    if Omega.q != Y.q:
        raise ConformanceError(f"precision is {Omega.q}x{Omega.q} but Y has {Y.q} columns")
    return Bv, Omega, X, Y


def loss(B, Omega, X, Y):
    """Negative-log-likelihood fit term of the coefficient block.

    Equals tr((Y - XB)' (Y - XB) Omega) / (2n).  Zero iff the residual is
    zero, since Omega is positive definite.
    """
    Bv, Omega, X, Y = _conform(B, Omega, X, Y)
    R = Y.values - X.values @ Bv
    return float(np.einsum("ij,ij->", R @ Omega.values, R)) / (2.0 * X.n)


def gradient(B, Omega, X, Y):
    """Gradient of :func:`loss` in B: -X'(Y - XB) Omega / n, shape (p, q)."""
    Bv, Omega, X, Y = _conform(B, Omega, X, Y)
    R = Y.values - X.values @ Bv
    return -(X.values.T @ (R @ Omega.values)) / X.n


def partial_score(B, Omega, X, Y, i, k):
    """Score of cell (i, k) with that cell's coefficient removed.

    Returns x_i' (Y - X B^(-ik)) omega_k where B^(-ik) is B with entry
    (i, k) set to zero and omega_k is column k of Omega.  Related to the
    gradient by grad[i, k] = (-score + omega_kk * ||x_i||^2 * B[i, k]) / n.
    """
    Bv, Omega, X, Y = _conform(B, Omega, X, Y)
    p, q = Bv.shape
    if not (0 <= i < p and 0 <= k < q):
        raise ConformanceError(f"cell ({i}, {k}) outside a {p}x{q} coefficient matrix")
    Bm = np.array(Bv)
    Bm[i, k] = 0.0
    R = Y.values - X.values @ Bm
    return float(X.values[:, i] @ (R @ Omega.values[:, k]))


def group_penalty_value(norms, penalty, sizes):
    """Sum of weight * size * norm over groups; zero-norm groups contribute
    zero even under an infinite weight."""
    active = norms > 0
    if not active.any():
        return 0.0
    terms = penalty.group_weights[active] * sizes[active] * norms[active]
    return float(terms.sum())


def objective(B, Omega, X, Y, penalty):
    """Full penalized objective at (B, Omega).

    loss(B, Omega) - log|Omega|/2 + sum_j w_j m_j ||B_j||_2
    + lam_omega * sum_{k != k'} |omega_kk'|.
    """
    X, Y, Omega = as_design(X), as_response(Y), as_precision(Omega)
    if not isinstance(B, GroupedCoefficients):
        raise ConformanceError("objective needs GroupedCoefficients to evaluate the group penalty")
    fit = loss(B, Omega, X, Y)
    norms = B.group_norms()
    sizes = B.partition.sizes
    if penalty.n_groups() != B.partition.n_groups:
        raise ConformanceError(
            f"penalty has {penalty.n_groups()} weights for {B.partition.n_groups} groups"
        )
    pen_b = group_penalty_value(norms, penalty, sizes)
    off = np.abs(Omega.values).sum() - np.abs(np.diag(Omega.values)).sum()
    return fit - 0.5 * Omega.log_det() + pen_b + penalty.lam_omega * float(off)


def center_columns(A):
    """Subtract column means; returns (centered, means)."""
    A = np.asarray(A, dtype=np.float64)
    means = A.mean(axis=0)
    return A - means, means


def standardize_columns(A):
    """Scale columns to unit standard deviation without centering.

    Constant columns are left alone.  Returns (scaled, scales) with
    ``scaled = A / scales``.
    """
    A = np.asarray(A, dtype=np.float64)
    scales = A.std(axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    return A / scales, scales
