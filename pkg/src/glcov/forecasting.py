"""Expanding-window one-step forecasts and estimated-network export."""

from dataclasses import dataclass

import numpy as np

from .estimator import EstimatorKind, fit
from .exceptions import ConformanceError, NumericalError
from .simgen import regression_to_var, var_to_regression

ALL_ESTIMATORS = tuple(kind.value for kind in EstimatorKind)


@dataclass(frozen=True)
class ForecastConfig:
    """Expanding-window setup.

    The first forecast uses ``first_origin`` points of history; every
    later point up to the end of the sample is forecast one step ahead
    from all points before it.  ``center`` subtracts the training-window
    mean per series before fitting and adds it back to the forecast.
    """

    first_origin: int = 13
    lags: int = 2
    estimators: tuple = ALL_ESTIMATORS
    center: bool = True

    def __post_init__(self):
        if self.lags < 1:
            raise ConformanceError("lags must be positive")
        if self.first_origin <= self.lags:
            raise ConformanceError("first_origin must exceed the lag order")
        if not self.estimators:
            raise ConformanceError("at least one estimator is required")


@dataclass(frozen=True)
class ForecastResult:
    """Per-origin absolute errors and their summary.

    ``errors[name]`` has one row per origin and one column per series;
    rows of failed fits are NaN and excluded from ``mafe``.
    """

    origins: np.ndarray
    errors: dict
    mafe: dict
    failures: tuple


def expanding_window(series, config=None, settings=None, **fit_kwargs):
    """Walk the sample forward, refitting and forecasting one step each time.

    Every origin gets a fresh fit per estimator, penalty levels retuned;
    estimators never share state.  Returns a ForecastResult whose MAFE is
    the plain mean of the per-origin, per-series absolute errors.
    """
    config = config or ForecastConfig()
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 2:
        raise ConformanceError("series must be a T-by-q matrix")
    T, q = series.shape
    if config.first_origin >= T:
        raise ConformanceError(
            f"first origin {config.first_origin} needs more than {T} time points"
        )
    kinds = [EstimatorKind.parse(e) if isinstance(e, str) else e for e in config.estimators]
    origins = np.arange(config.first_origin, T)
    errors = {kind.value: np.full((origins.size, q), np.nan) for kind in kinds}
    failures = []
    for pos, origin in enumerate(origins):
        window = series[:origin]
        mean = window.mean(axis=0) if config.center else np.zeros(q)
        training = window - mean
        X, Y, partition = var_to_regression(training, lags=config.lags)
        for kind in kinds:
            try:
                report = fit(kind, X, Y, partition, settings=settings, **fit_kwargs)
            except NumericalError:
                failures.append((int(origin), kind.value))
                continue
            lag_mats = regression_to_var(report.coefficients, lags=config.lags)
            pred = mean.copy()
            for l, mat in enumerate(lag_mats):
                pred += mat @ training[origin - 1 - l]
            errors[kind.value][pos] = np.abs(series[origin] - pred)
    mafe = {}
    for kind in kinds:
        rows = errors[kind.value]
        ok = ~np.isnan(rows).any(axis=1)
        mafe[kind.value] = float(rows[ok].mean()) if ok.any() else float("nan")
    return ForecastResult(
        origins=origins, errors=errors, mafe=mafe, failures=tuple(failures)
    )


def export_networks(report, names=None, lags=2):
    """Edge lists implied by a fitted lagged model.

    A directed edge i -> k is present when any lag coefficient of series i
    in equation k is non-zero; an undirected edge joins responses with a
    non-zero off-diagonal precision entry.  Returns (directed, undirected)
    as lists of name pairs.
    """
    B = report.coefficients.values
    Om = report.precision.values
    p, q = B.shape
    if p != lags * q:
        raise ConformanceError(f"coefficients are {p}x{q}, expected ({lags}*{q})x{q}")
    if names is None:
        names = [f"y{i + 1}" for i in range(q)]
    if len(names) != q:
        raise ConformanceError(f"{len(names)} names for {q} series")
    directed = []
    for i in range(q):
        for k in range(q):
            if any(B[i + l * q, k] != 0.0 for l in range(lags)):
                directed.append((names[i], names[k]))
    undirected = []
    for a in range(q):
        for b in range(a + 1, q):
            if Om[a, b] != 0.0:
                undirected.append((names[a], names[b]))
    return directed, undirected


def dot_graph(edges, directed, name="network"):
    """Graph-description text for an edge list."""
    keyword, arrow = ("digraph", "->") if directed else ("graph", "--")
    lines = [f"{keyword} {name} {{"]
    for src, dst in edges:
        lines.append(f'    "{src}" {arrow} "{dst}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
