"""Block coordinate descent for grouped penalties under a fixed precision.

Solves, for fixed Omega,

    min_B  tr((Y - XB)'(Y - XB) Omega) / (2n) + sum_j w_j m_j ||B_j||_2

by sweeping the cell groups in ascending id order.  A group is set to
exactly zero when the gradient with the whole group removed is small
enough; otherwise each of its cells takes a closed-form update whose
shrinkage denominator uses the group norm from the previous sweep.
"""

from dataclasses import dataclass

import numpy as np

from .core import (
    GroupedCoefficients,
    GroupPartition,
    PenaltyConfig,
    as_design,
    as_precision,
    as_response,
    gradient,
    group_penalty_value,
)
from .exceptions import ConformanceError, NumericalError

DIVERGENCE_SLACK = 1e-8


@dataclass(frozen=True)
class SolverSettings:
    """Stopping rule for the sweep loop.

    ``tolerance`` bounds the relative objective change between successive
    sweeps; ``max_iterations`` caps the number of sweeps.
    """

    tolerance: float = 1e-2
    max_iterations: int = 500

    def __post_init__(self):
        if not (self.tolerance > 0):
            raise ConformanceError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ConformanceError("max_iterations must be at least 1")


@dataclass(frozen=True)
class BcdTrace:
    """Per-sweep diagnostics; ``objectives[0]`` is the warm-start value."""

    objectives: np.ndarray
    active_groups: np.ndarray
    converged: bool
    sweeps: int


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _lasso_cd(Xv, y, lam, b0, xsq, tol, max_sweeps):
    """Cyclic coordinate descent for one response column.

    Minimizes ||y - Xb||^2 / (2n) + lam * ||b||_1, stopping when the
    relative objective change between sweeps drops below ``tol``.
    """
    n, p = Xv.shape
    b = np.array(b0, dtype=np.float64)
    r = y - Xv @ b
    obj = float(r @ r) / (2.0 * n) + lam * float(np.abs(b).sum())
    for _ in range(max_sweeps):
        for j in range(p):
            if xsq[j] <= 0.0:
                # inert column: drop it from the model
                if b[j] != 0.0:
                    r += Xv[:, j] * b[j]
                    b[j] = 0.0
                continue
            z = (Xv[:, j] @ r) / n + (xsq[j] / n) * b[j]
            new = soft_threshold(z, lam) / (xsq[j] / n)
            if new != b[j]:
                r -= Xv[:, j] * (new - b[j])
                b[j] = new
        prev, obj = obj, float(r @ r) / (2.0 * n) + lam * float(np.abs(b).sum())
        if abs(prev - obj) <= tol * max(abs(prev), 1e-12):
            break
    return b


LASSO_TOL = 1e-4
LASSO_MAX_SWEEPS = 1000


def lasso_init(X, Y, lam_init, partition=None):
    """Independent single-response lasso fits used as the initializer.

    ``lam_init`` is a scalar or per-response array of penalty levels.
    Returns the stacked coefficients wrapped with ``partition`` (singleton
    cells by default).
    """
    X, Y = as_design(X), as_response(Y)
    if X.n != Y.n:
        raise ConformanceError(f"X has {X.n} rows but Y has {Y.n}")
    lams = np.broadcast_to(np.asarray(lam_init, dtype=np.float64), (Y.q,))
    if (lams < 0).any() or not np.isfinite(lams).all():
        raise ConformanceError("initializer penalties must be finite and non-negative")
    xsq = X.column_sq_norms()
    B = np.empty((X.p, Y.q))
    for k in range(Y.q):
        B[:, k] = _lasso_cd(
            X.values, Y.values[:, k], float(lams[k]), np.zeros(X.p), xsq,
            LASSO_TOL, LASSO_MAX_SWEEPS,
        )
    if partition is None:
        partition = GroupPartition.singleton(X.p, Y.q)
    return GroupedCoefficients(B, partition)


def lasso_init_bic(X, Y, partition=None, grid_points=20, grid_span=1e-3):
    """BIC-tuned initializer: one penalty level per response column.

    Each response gets a descending, warm-started geometric grid anchored
    at its own max |x_i'y_k| / n; the level with the smallest
    2n * fit + df * log(n) wins, ties to the larger level.
    """
    X, Y = as_design(X), as_response(Y)
    if X.n != Y.n:
        raise ConformanceError(f"X has {X.n} rows but Y has {Y.n}")
    n = X.n
    xsq = X.column_sq_norms()
    B = np.empty((X.p, Y.q))
    chosen = np.empty(Y.q)
    for k in range(Y.q):
        y = Y.values[:, k]
        lam_top = float(np.abs(X.values.T @ y).max()) / n
        grid = np.geomspace(lam_top, lam_top * grid_span, grid_points) if lam_top > 0 else np.array([0.0])
        best_bic = np.inf
        b = np.zeros(X.p)
        for lam in grid:
            b = _lasso_cd(X.values, y, float(lam), b, xsq, LASSO_TOL, LASSO_MAX_SWEEPS)
            r = y - X.values @ b
            bic = float(r @ r) + np.count_nonzero(b) * np.log(n)
            if bic < best_bic:
                best_bic, chosen[k], best_b = bic, lam, b.copy()
        B[:, k] = best_b
    if partition is None:
        partition = GroupPartition.singleton(X.p, Y.q)
    return GroupedCoefficients(B, partition), chosen


def adaptive_weights(b0, lam, lam_omega=0.0):
    """Per-group penalty levels lam / ||b0_j||, infinite for empty groups.

    At lam == 0 every weight is zero, including groups the initializer
    left empty.
    """
    if lam < 0:
        raise ConformanceError("lam must be non-negative")
    norms = b0.group_norms()
    if lam == 0:
        weights = np.zeros_like(norms)
    else:
        with np.errstate(divide="ignore"):
            weights = np.where(norms > 0, lam / np.where(norms > 0, norms, 1.0), np.inf)
    return PenaltyConfig(lam=float(lam), group_weights=weights, lam_omega=lam_omega)


def group_kkt_check(B, Omega, X, Y, penalty):
    """Per-group stationarity residuals at (B, Omega).

    Active groups measure || grad_j + w_j m_j B_j / ||B_j|| ||; empty
    groups measure the excess of ||grad_j|| over w_j m_j, clipped at zero.
    """
    if not isinstance(B, GroupedCoefficients):
        raise ConformanceError("group_kkt_check needs GroupedCoefficients")
    part = B.partition
    if penalty.n_groups() != part.n_groups:
        raise ConformanceError("penalty does not match the partition")
    grad = gradient(B, Omega, X, Y)
    out = np.empty(part.n_groups)
    for j in range(part.n_groups):
        rows, cols = part.cells(j)
        gj = grad[rows, cols]
        vj = B.values[rows, cols]
        thr = penalty.group_weights[j] * part.sizes[j]
        nv = float(np.linalg.norm(vj))
        if nv > 0:
            out[j] = float(np.linalg.norm(gj + thr * vj / nv))
        else:
            out[j] = max(0.0, float(np.linalg.norm(gj)) - thr)
    return out


def _group_pass(A, T, v, g, thr, n):
    """One sequential update of every cell in a group.

    ``T`` is the loss gradient with the whole group zeroed, ``A`` the local
    curvature matrix, ``g`` the frozen group norm feeding the shrinkage
    denominator.
    """
    m = v.size
    shrink = n * thr / g
    for s in range(m):
        rest = float(A[s] @ v) - A[s, s] * v[s]
        denom = A[s, s] + shrink
        if denom <= 0.0:
            continue
        v[s] = (-n * T[s] - rest) / denom
    return v


ACTIVATE_MAX_PASSES = 500
ACTIVATE_TOL = 1e-13


def _activate_group(A, T, thr, n):
    """Solve one group's subproblem from an exact-zero start.

    The sweep update cannot leave zero because its denominator divides by
    the previous norm, so a group whose zero test fails is re-seeded and
    the cell update iterated with refreshed norms until the subproblem
    converges.  Returns the new cell values, or None when no strict
    improvement over zero was found.
    """
    tnorm = float(np.linalg.norm(T))
    curv = float(np.diag(A).mean()) / n
    if curv <= 0.0:
        curv = 1.0
    v = -T / tnorm * max((tnorm - thr) / curv, ACTIVATE_TOL)
    for _ in range(ACTIVATE_MAX_PASSES):
        g = float(np.linalg.norm(v))
        if g == 0.0:
            break
        prev = v.copy()
        v = _group_pass(A, T, v, g, thr, n)
        if np.abs(v - prev).max() <= ACTIVATE_TOL * (1.0 + np.abs(v).max()):
            break
    # accept only a strict improvement of the local objective over zero
    delta = float(T @ v) + float(v @ A @ v) / (2.0 * n) + thr * float(np.linalg.norm(v))
    return v if delta < 0.0 else None


def bcd_solve(X, Y, Omega, penalty, settings=None, warm_start=None):
    """Grouped coordinate descent at fixed Omega.

    Returns (coefficients, trace).  ``warm_start`` supplies both the
    starting point and the group partition; the objective in the trace is
    the fit term plus the group penalty.
    """
    X, Y, Omega = as_design(X), as_response(Y), as_precision(Omega)
    settings = settings or SolverSettings()
    if warm_start is None:
        raise ConformanceError("bcd_solve needs a warm start carrying the partition")
    part = warm_start.partition
    if warm_start.values.shape != (X.p, Y.q):
        raise ConformanceError(
            f"warm start {warm_start.values.shape} does not conform to X ({X.n}x{X.p}), Y ({Y.n}x{Y.q})"
        )
    if X.n != Y.n or Omega.q != Y.q:
        raise ConformanceError("X, Y, and Omega do not conform")
    if penalty.n_groups() != part.n_groups:
        raise ConformanceError(
            f"penalty has {penalty.n_groups()} weights for {part.n_groups} groups"
        )

    n = X.n
    Xv, Yv, Om = X.values, Y.values, Omega.values
    XtX = Xv.T @ Xv
    K = part.n_groups
    thr = penalty.group_weights * part.sizes
    cells = [part.cells(j) for j in range(K)]
    # local curvature of each group: (x_a'x_b) * omega_{c_b c_a}
    local_A = [XtX[np.ix_(r, r)] * Om[np.ix_(c, c)] for r, c in cells]

    B = np.array(warm_start.values, dtype=np.float64)
    G = Xv.T @ (Yv - Xv @ B)

    def current_objective():
        R = Yv - Xv @ B
        rho = float(np.einsum("ij,ij->", R @ Om, R)) / (2.0 * n)
        sq = np.bincount(part.labels.ravel(), weights=(B**2).ravel(), minlength=K)
        return rho + group_penalty_value(np.sqrt(sq), penalty, part.sizes), R

    obj, _ = current_objective()
    objectives = [obj]
    active = [int(np.count_nonzero([np.any(B[r, c]) for r, c in cells]))]
    converged = False
    sweeps = 0

    for sweep in range(settings.max_iterations):
        for j in range(K):
            rows, cols = cells[j]
            A = local_A[j]
            v = B[rows, cols]
            base = np.einsum("sq,qs->s", G[rows, :], Om[:, cols])
            T = -(base + A @ v) / n
            if not np.isfinite(T).all():
                raise NumericalError("non-finite group gradient during sweep")
            if float(np.linalg.norm(T)) <= thr[j]:
                new = None if not v.any() else np.zeros_like(v)
            else:
                g = float(np.linalg.norm(v))
                if g == 0.0:
                    new = _activate_group(A, T, thr[j], n)
                else:
                    new = _group_pass(A, T, v.copy(), g, thr[j], n)
            if new is None:
                continue
            delta = new - v
            nz = np.flatnonzero(delta)
            for s in nz:
                G[:, cols[s]] -= XtX[:, rows[s]] * delta[s]
            B[rows, cols] = new

        sweeps = sweep + 1
        prev = objectives[-1]
        obj, R = current_objective()
        if not np.isfinite(obj):
            raise NumericalError("objective is not finite")
        if np.isfinite(prev) and obj > prev + DIVERGENCE_SLACK * (1.0 + abs(prev)):
            raise NumericalError(
                f"objective increased from {prev:.6g} to {obj:.6g} in sweep {sweeps}"
            )
        G = Xv.T @ R  # refresh to cancel incremental drift
        objectives.append(obj)
        active.append(int(sum(1 for r, c in cells if B[r, c].any())))
        if np.isfinite(prev) and abs(prev - obj) <= settings.tolerance * max(abs(prev), 1e-12):
            converged = True
            break

    trace = BcdTrace(
        objectives=np.asarray(objectives),
        active_groups=np.asarray(active, dtype=np.int64),
        converged=converged,
        sweeps=sweeps,
    )
    return GroupedCoefficients(B, part), trace
