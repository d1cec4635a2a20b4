"""Joint estimation of sparse coefficients and sparse error precision.

The four estimator kinds share one machinery: grouped coordinate descent
for B given Omega, a penalized precision solve on the residual covariance
for Omega given B, and BIC model selection for both penalty levels.  The
plain-lasso kinds are the same problem with singleton cell groups; the
covariance-free kinds stop after the coefficient stage and keep
Omega = I.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .core import (
    GroupedCoefficients,
    GroupPartition,
    PenaltyConfig,
    PrecisionMatrix,
    as_design,
    as_precision,
    as_response,
    objective,
    loss,
)
from .exceptions import ConformanceError, ConfigurationError
from .glasso import (
    GLASSO_TOL,
    CovarianceEstimate,
    glasso_kkt_check,
    glasso_solve,
    lambda_omega_grid as _default_omega_grid,
    residual_covariance,
    stabilize_covariance,
)
from .solver import (
    SolverSettings,
    adaptive_weights,
    bcd_solve,
    group_kkt_check,
    lasso_init_bic,
)

GRID_POINTS = 20
GRID_SPAN = 1e-3
OUTER_TOL = 1e-2
MAX_OUTER = 50


class EstimatorKind(enum.Enum):
    GROUP_LASSO_COV = "GroupLassoCov"
    GROUP_LASSO = "GroupLasso"
    LASSO_COV = "LassoCov"
    LASSO = "Lasso"

    @property
    def uses_covariance(self):
        return self in (EstimatorKind.GROUP_LASSO_COV, EstimatorKind.LASSO_COV)

    @property
    def uses_groups(self):
        return self in (EstimatorKind.GROUP_LASSO_COV, EstimatorKind.GROUP_LASSO)

    @classmethod
    def parse(cls, name):
        for kind in cls:
            if kind.value == name or kind.name == name:
                return kind
        known = ", ".join(k.value for k in cls)
        raise ConfigurationError(f"unknown estimator {name!r} (known: {known})")


@dataclass(frozen=True)
class FitReport:
    """Everything a fit produced, plus convergence and certificate data."""

    kind: EstimatorKind
    coefficients: GroupedCoefficients
    precision: PrecisionMatrix
    lam: float
    lam_omega: float | None
    lam_init: np.ndarray
    outer_iterations: int
    converged: bool
    stage_objectives: np.ndarray
    stage_kinds: tuple
    bcd_converged: tuple
    bcd_sweeps: tuple
    group_kkt: np.ndarray
    glasso_kkt: float | None
    jitter_count: int

    def to_dict(self):
        B = self.coefficients.values
        return {
            "estimator": self.kind.value,
            "n_predictors": int(B.shape[0]),
            "n_responses": int(B.shape[1]),
            "n_groups": int(self.coefficients.partition.n_groups),
            "lambda": float(self.lam),
            "lambda_omega": None if self.lam_omega is None else float(self.lam_omega),
            "lambda_init": [float(v) for v in np.atleast_1d(self.lam_init)],
            "outer_iterations": int(self.outer_iterations),
            "converged": bool(self.converged),
            "stage_objectives": [float(v) for v in self.stage_objectives],
            "stage_kinds": list(self.stage_kinds),
            "bcd_converged": [bool(v) for v in self.bcd_converged],
            "bcd_sweeps": [int(v) for v in self.bcd_sweeps],
            "group_kkt_max": float(self.group_kkt.max()),
            "glasso_kkt": None if self.glasso_kkt is None else float(self.glasso_kkt),
            "jitter_count": int(self.jitter_count),
            "nonzero_coefficients": int(np.count_nonzero(B)),
            "nonzero_offdiagonal_precision": int(
                np.count_nonzero(np.triu(self.precision.values, 1))
            ),
        }


def lambda_max(X, Y, Omega, partition, b0=None):
    """Smallest global level at which every group is shut off.

    With ``b0`` the per-group levels are lam / ||b0_j||, so the bound is
    max_j ||grad0_j|| * ||b0_j|| / m_j over the groups the initializer
    kept; without ``b0`` the weights are flat and the bound is
    max_j ||grad0_j|| / m_j.
    """
    X, Y, Omega = as_design(X), as_response(Y), as_precision(Omega)
    grad0 = -(X.values.T @ (Y.values @ Omega.values)) / X.n
    sq = np.bincount(
        partition.labels.ravel(), weights=(grad0**2).ravel(), minlength=partition.n_groups
    )
    grad_norms = np.sqrt(sq)
    if b0 is None:
        return float((grad_norms / partition.sizes).max())
    norms0 = b0.group_norms()
    active = norms0 > 0
    if not active.any():
        return 0.0
    return float((grad_norms[active] * norms0[active] / partition.sizes[active]).max())


def default_lambda_grid(top, points=GRID_POINTS, span=GRID_SPAN):
    """Descending geometric grid from ``top`` spanning ``span`` of it."""
    if top < 0 or not np.isfinite(top):
        raise ConfigurationError("grid anchor must be finite and non-negative")
    if top == 0.0:
        return np.array([0.0])
    return np.geomspace(top, top * span, points)


def _bic_path(X, Y, Omega, lambda_grid, settings, b0, warm):
    """Warm-started descent over the penalty grid; returns the BIC winner."""
    grid = np.sort(np.asarray(lambda_grid, dtype=np.float64))[::-1]
    if grid.size == 0:
        raise ConfigurationError("lambda grid is empty")
    if (grid < 0).any() or not np.isfinite(grid).all():
        raise ConfigurationError("lambda grid must be finite and non-negative")
    n = X.n
    best = None
    for lam in grid:
        pen = adaptive_weights(b0, float(lam))
        warm, trace = bcd_solve(X, Y, Omega, pen, settings, warm)
        k_nonzero = int(np.count_nonzero(warm.values))
        bic = 2.0 * n * loss(warm, Omega, X, Y) + k_nonzero * np.log(n)
        if best is None or bic < best["bic"]:
            best = {
                "bic": bic,
                "lam": float(lam),
                "coefficients": warm,
                "penalty": pen,
                "trace": trace,
            }
    return best


def bic_select(X, Y, Omega, partition, lambda_grid, settings=None, b0=None):
    """Pick the coefficient penalty level by BIC; ties go to the larger level.

    Returns (lam, coefficients).  BIC is 2n * fit + (#nonzero) * log(n),
    evaluated at the grid's warm-started solutions in descending order.
    """
    X, Y, Omega = as_design(X), as_response(Y), as_precision(Omega)
    settings = settings or SolverSettings()
    if b0 is None:
        b0, _ = lasso_init_bic(X, Y, partition)
    best = _bic_path(X, Y, Omega, lambda_grid, settings, b0, b0)
    return best["lam"], best["coefficients"]


def bic_select_omega(S, grid, tol=GLASSO_TOL):
    """Pick the precision penalty level by BIC; ties go to the larger level.

    BIC is n * (tr(S Omega) - log|Omega|) + log(n) * (#nonzero upper
    off-diagonal entries).
    """
    if not isinstance(S, CovarianceEstimate):
        raise ConformanceError("bic_select_omega needs a CovarianceEstimate")
    grid = np.sort(np.asarray(grid, dtype=np.float64))[::-1]
    if grid.size == 0:
        raise ConfigurationError("lambda_omega grid is empty")
    if (grid < 0).any() or not np.isfinite(grid).all():
        raise ConfigurationError("lambda_omega grid must be finite and non-negative")
    n = S.n
    best = None
    for lam in grid:
        Om = glasso_solve(S, float(lam), tol=tol)
        nnz = int(np.count_nonzero(np.triu(Om.values, 1)))
        fit_term = float(np.einsum("ij,ji->", S.values, Om.values)) - Om.log_det()
        bic = n * fit_term + np.log(n) * nnz
        if best is None or bic < best[0]:
            best = (bic, float(lam), Om)
    return best[1], best[2]


def _effective_partition(kind, partition, p, q):
    if not kind.uses_groups:
        return GroupPartition.singleton(p, q)
    if partition is None:
        raise ConformanceError(f"{kind.value} needs a group partition")
    if partition.shape != (p, q):
        raise ConformanceError(
            f"partition {partition.shape} does not match coefficients ({p}, {q})"
        )
    return partition


def fit(
    kind,
    X,
    Y,
    partition=None,
    lambda_grid=None,
    lambda_omega_grid=None,
    settings=None,
    glasso_tol=GLASSO_TOL,
    outer_tol=OUTER_TOL,
    max_outer=MAX_OUTER,
    retune_lambda=False,
):
    """Fit one of the four estimator kinds and return a FitReport.

    The coefficient penalty level is selected once, at the first
    coefficient stage (set ``retune_lambda`` to reselect every stage); the
    precision level is reselected at every precision stage.  Grids default
    to 20 geometric points spanning three decades below their anchors.
    Alternation stops when the relative change of the full objective
    between outer iterations drops below ``outer_tol``.
    """
    if isinstance(kind, str):
        kind = EstimatorKind.parse(kind)
    X, Y = as_design(X), as_response(Y)
    settings = settings or SolverSettings()
    part = _effective_partition(kind, partition, X.p, Y.q)

    b0, lam_init = lasso_init_bic(X, Y, part)
    Omega = PrecisionMatrix.identity(Y.q)
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(lambda_max(X, Y, Omega, part, b0))

    stage_objectives = []
    stage_kinds = []
    bcd_converged = []
    bcd_sweeps = []
    jitter_count = 0
    lam = None
    lam_omega = None
    pen = None
    B = b0
    S_last = None
    outer_done = 0
    converged = False

    for outer in range(1, max_outer + 1):
        if lam is None or retune_lambda:
            best = _bic_path(X, Y, Omega, lambda_grid, settings, b0, B)
            lam, B, pen, trace = best["lam"], best["coefficients"], best["penalty"], best["trace"]
        else:
            B, trace = bcd_solve(X, Y, Omega, pen, settings, B)
        bcd_converged.append(bool(trace.converged))
        bcd_sweeps.append(int(trace.sweeps))
        # the precision stage minimizes the joint objective with the
        # off-diagonal level at half the graphical-lasso level (the lasso
        # counts each symmetric pair twice against tr(S Omega) - log|Omega|,
        # the joint objective against their halves), so the trace uses that
        # scale to stay non-increasing across stages
        half = 0.5 * lam_omega if lam_omega is not None else 0.0
        pen_full = PenaltyConfig(pen.lam, pen.group_weights, half)
        stage_objectives.append(objective(B, Omega, X, Y, pen_full))
        stage_kinds.append("coefficients")
        outer_done = outer

        if not kind.uses_covariance:
            converged = bool(trace.converged)
            break

        S = residual_covariance(X, Y, B)
        S, jit = stabilize_covariance(S)
        if jit > 0:
            jitter_count += 1
        S_last = S
        grid_w = _default_omega_grid(S) if lambda_omega_grid is None else lambda_omega_grid
        lam_omega, Omega = bic_select_omega(S, grid_w, tol=glasso_tol)
        pen_full = PenaltyConfig(pen.lam, pen.group_weights, 0.5 * lam_omega)
        stage_objectives.append(objective(B, Omega, X, Y, pen_full))
        stage_kinds.append("precision")

        # compare ends of successive outer iterations
        if outer > 1:
            prev, curr = stage_objectives[-3], stage_objectives[-1]
            if abs(prev - curr) <= outer_tol * max(abs(prev), 1e-12):
                converged = True
                break

    pen_final = PenaltyConfig(
        pen.lam, pen.group_weights, 0.5 * lam_omega if lam_omega is not None else 0.0
    )
    group_kkt = group_kkt_check(B, Omega, X, Y, pen_final)
    glasso_kkt = None
    if kind.uses_covariance and S_last is not None:
        glasso_kkt = glasso_kkt_check(S_last, Omega, lam_omega)

    return FitReport(
        kind=kind,
        coefficients=B,
        precision=Omega,
        lam=float(lam),
        lam_omega=None if lam_omega is None else float(lam_omega),
        lam_init=np.atleast_1d(lam_init),
        outer_iterations=outer_done,
        converged=converged,
        stage_objectives=np.asarray(stage_objectives),
        stage_kinds=tuple(stage_kinds),
        bcd_converged=tuple(bcd_converged),
        bcd_sweeps=tuple(bcd_sweeps),
        group_kkt=group_kkt,
        glasso_kkt=glasso_kkt,
        jitter_count=jitter_count,
    )
