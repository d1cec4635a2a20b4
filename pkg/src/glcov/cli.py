"""Command line front end.

Exit codes: 0 on success, 2 for unusable input (files, flags, scenario or
group structure), 3 for numerical failures during estimation or
simulation.
"""

import argparse
import os
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import fileio
from .core import GroupPartition, PrecisionMatrix, center_columns, standardize_columns
from .estimator import (
    EstimatorKind,
    default_lambda_grid,
    fit,
    lambda_max,
)
from .exceptions import (
    ConfigurationError,
    ConformanceError,
    DefinitenessError,
    GlcovError,
    InputError,
    NumericalError,
    StabilityError,
)
from .forecasting import ForecastConfig, dot_graph, expanding_window, export_networks
from .simgen import paired_ttest, read_scenario, run_scenario, summarize
from .solver import SolverSettings, lasso_init_bic

THREADS_ENV = "GLCOV_THREADS"


def _parse_estimators(text):
    return [EstimatorKind.parse(token.strip()) for token in text.split(",") if token.strip()]


def _parse_grid(spec):
    """Grid flag: 'auto', 'max-only', or comma-separated levels."""
    if spec in ("auto", "max-only"):
        return spec
    try:
        values = [float(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        raise ConfigurationError(f"bad grid specification {spec!r}") from None
    if not values:
        raise ConfigurationError("grid specification is empty")
    return np.asarray(values)


def _load_partition(args, p, q):
    if args.groups == "singleton":
        return GroupPartition.singleton(p, q)
    if args.groups == "var-lags":
        if p != args.lags * q:
            raise ConformanceError(
                f"var-lags groups need p = lags*q, got p={p}, q={q}, lags={args.lags}"
            )
        return GroupPartition.var_lags(q, lags=args.lags)
    return fileio.read_groups_csv(args.groups, p, q)


def cmd_fit(args):
    X = fileio.read_matrix_csv(args.x)
    Y = fileio.read_matrix_csv(args.y)
    if X.shape[0] != Y.shape[0]:
        raise ConformanceError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if args.center_y:
        Y, _ = center_columns(Y)
    scales = np.ones(X.shape[1])
    if args.standardize:
        X, scales = standardize_columns(X)
    partition = _load_partition(args, X.shape[1], Y.shape[1])
    kind = EstimatorKind.parse(args.estimator)
    settings = SolverSettings(tolerance=args.tolerance, max_iterations=args.max_iterations)

    lambda_grid = _parse_grid(args.lambda_grid)
    if isinstance(lambda_grid, str):
        if lambda_grid == "auto":
            lambda_grid = None
        else:
            b0, _ = lasso_init_bic(X, Y, partition)
            lambda_grid = np.array([lambda_max(X, Y, np.eye(Y.shape[1]), partition, b0)])
    omega_grid = _parse_grid(args.lambda_omega_grid)
    if isinstance(omega_grid, str):
        omega_grid = None  # both spellings defer to the per-stage anchor

    report = fit(
        kind,
        X,
        Y,
        partition,
        lambda_grid=lambda_grid,
        lambda_omega_grid=omega_grid,
        settings=settings,
        outer_tol=args.outer_tolerance,
        max_outer=args.max_outer,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    coef = report.coefficients.values / scales[:, None]
    fileio.write_matrix_csv(out / "b_hat.csv", coef)
    fileio.write_matrix_csv(out / "omega_hat.csv", report.precision.values)
    payload = report.to_dict()
    payload["seed"] = args.seed
    payload["standardized"] = bool(args.standardize)
    payload["centered_responses"] = bool(args.center_y)
    fileio.write_json(out / "fit_report.json", payload)
    print(
        f"{kind.value}: lambda={report.lam:.6g}"
        + (f", lambda_omega={report.lam_omega:.6g}" if report.lam_omega is not None else "")
        + f", nonzero={int(np.count_nonzero(coef))}/{coef.size}, outputs in {out}"
    )
    return 0


def cmd_simulate(args):
    scenario = read_scenario(args.scenario)
    estimators = _parse_estimators(args.estimators)
    threads = args.threads if args.threads else int(os.environ.get(THREADS_ENV, "1"))
    rows = run_scenario(
        scenario, estimators, replications=args.replications, n_jobs=threads
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    columns = ["scenario", "estimator", "replication", "maee", "tpr", "tnr"]
    fileio.write_rows_csv(out / "results.csv", rows, columns)
    summary = summarize(rows)
    fileio.write_rows_csv(
        out / "summary.csv", summary, ["estimator", "replications", "maee", "tpr", "tnr"]
    )
    names = {row["estimator"] for row in rows}
    if {"GroupLassoCov", "GroupLasso"} <= names:
        test = paired_ttest(rows, "GroupLasso", "GroupLassoCov")
        fileio.write_rows_csv(
            out / "paired_ttest.csv",
            [test],
            ["comparison", "metric", "t_statistic", "p_value", "pairs", "mean_difference"],
        )
    for row in summary:
        print(
            f"{row['estimator']}: MAEE={row['maee']:.4f} TPR={row['tpr']:.3f} "
            f"TNR={row['tnr']:.3f} ({row['replications']} replications)"
        )
    print(f"outputs in {out}")
    return 0


def cmd_forecast(args):
    series, names = fileio.read_series_csv(args.series)
    estimators = _parse_estimators(args.estimators)
    config = ForecastConfig(
        first_origin=args.first_origin,
        lags=args.lags,
        estimators=tuple(kind.value for kind in estimators),
        center=not args.no_center,
    )
    result = expanding_window(series, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sample = args.sample_name or Path(args.series).stem
    mafe_rows = [
        {"estimator": est, "sample": sample, "mafe": result.mafe[est]}
        for est in sorted(result.mafe)
    ]
    fileio.write_rows_csv(out / "mafe.csv", mafe_rows, ["estimator", "sample", "mafe"])
    error_rows = []
    series_names = names or [f"y{i + 1}" for i in range(series.shape[1])]
    for est in sorted(result.errors):
        table = result.errors[est]
        for pos, origin in enumerate(result.origins):
            for i, name in enumerate(series_names):
                value = table[pos, i]
                if not np.isnan(value):
                    error_rows.append(
                        {
                            "estimator": est,
                            "origin": int(origin),
                            "series": name,
                            "abs_error": value,
                        }
                    )
    fileio.write_rows_csv(
        out / "origin_errors.csv", error_rows, ["estimator", "origin", "series", "abs_error"]
    )

    # networks come from a full-sample covariance fit
    centered = series - series.mean(axis=0) if config.center else series
    from .simgen import var_to_regression

    X, Y, partition = var_to_regression(centered, lags=config.lags)
    report = fit(EstimatorKind.GROUP_LASSO_COV, X, Y, partition)
    directed, undirected = export_networks(report, names=series_names, lags=config.lags)
    fileio.write_edges_csv(out / "directed_edges.csv", directed, ["source", "target"])
    fileio.write_edges_csv(out / "undirected_edges.csv", undirected, ["node_a", "node_b"])
    (out / "directed.dot").write_text(dot_graph(directed, directed=True, name="lagged_effects"))
    (out / "undirected.dot").write_text(
        dot_graph(undirected, directed=False, name="contemporaneous")
    )
    for row in mafe_rows:
        print(f"{row['estimator']}: MAFE={row['mafe']:.4f}")
    if result.failures:
        print(f"warning: {len(result.failures)} origin fits failed", file=sys.stderr)
    print(f"outputs in {out}")
    return 0


def cmd_export_network(args):
    B = fileio.read_matrix_csv(args.coefficients)
    Om = fileio.read_matrix_csv(args.precision)
    q = Om.shape[1]
    if Om.shape[0] != q:
        raise ConformanceError(f"precision must be square, got {Om.shape}")
    if B.shape != (args.lags * q, q):
        raise ConformanceError(
            f"coefficients are {B.shape}, expected ({args.lags * q}, {q})"
        )
    names = [t.strip() for t in args.names.split(",")] if args.names else None
    report = SimpleNamespace(
        coefficients=SimpleNamespace(values=B), precision=PrecisionMatrix(Om)
    )
    directed, undirected = export_networks(report, names=names, lags=args.lags)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_edges_csv(out / "directed_edges.csv", directed, ["source", "target"])
    fileio.write_edges_csv(out / "undirected_edges.csv", undirected, ["node_a", "node_b"])
    (out / "directed.dot").write_text(dot_graph(directed, directed=True, name="lagged_effects"))
    (out / "undirected.dot").write_text(
        dot_graph(undirected, directed=False, name="contemporaneous")
    )
    print(f"{len(directed)} directed and {len(undirected)} undirected edges in {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="glcov",
        description="Grouped sparse multivariate regression with error-precision estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one estimator to X/Y CSV files")
    p_fit.add_argument("--x", required=True, help="design matrix CSV (n rows, p columns)")
    p_fit.add_argument("--y", required=True, help="response matrix CSV (n rows, q columns)")
    p_fit.add_argument(
        "--groups",
        required=True,
        help="group CSV with 1-based (row,col,group) lines, or 'singleton'/'var-lags'",
    )
    p_fit.add_argument(
        "--estimator",
        default="GroupLassoCov",
        help="GroupLassoCov, GroupLasso, LassoCov, or Lasso",
    )
    p_fit.add_argument("--lambda-grid", default="auto", help="'auto', 'max-only', or comma list")
    p_fit.add_argument("--lambda-omega-grid", default="auto", help="'auto' or comma list")
    p_fit.add_argument("--tolerance", type=float, default=1e-2)
    p_fit.add_argument("--max-iterations", type=int, default=500)
    p_fit.add_argument("--outer-tolerance", type=float, default=1e-2)
    p_fit.add_argument("--max-outer", type=int, default=50)
    p_fit.add_argument("--lags", type=int, default=2, help="lag order for var-lags groups")
    p_fit.add_argument("--standardize", action="store_true", help="scale X columns to unit sd")
    p_fit.add_argument("--center-y", action="store_true", help="subtract response column means")
    p_fit.add_argument("--seed", type=int, default=0, help="recorded in the report; fits are deterministic")
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="run Monte Carlo replications of a scenario")
    p_sim.add_argument("--scenario", required=True, help="flat key = value scenario file")
    p_sim.add_argument("--replications", type=int, default=None, help="override the scenario")
    p_sim.add_argument(
        "--estimators",
        default="GroupLassoCov,GroupLasso,LassoCov,Lasso",
        help="comma-separated estimator names",
    )
    p_sim.add_argument(
        "--threads",
        type=int,
        default=0,
        help=f"worker processes (default ${THREADS_ENV} or 1)",
    )
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_fc = sub.add_parser("forecast", help="expanding-window one-step forecasts")
    p_fc.add_argument("--series", required=True, help="T-by-q series CSV, optional header")
    p_fc.add_argument("--first-origin", type=int, default=13)
    p_fc.add_argument("--lags", type=int, default=2)
    p_fc.add_argument(
        "--estimators",
        default="GroupLassoCov,GroupLasso,LassoCov,Lasso",
        help="comma-separated estimator names",
    )
    p_fc.add_argument("--no-center", action="store_true", help="skip training-mean centering")
    p_fc.add_argument("--sample-name", default=None, help="sample column value (default: file stem)")
    p_fc.add_argument("--out", required=True, help="output directory")
    p_fc.set_defaults(func=cmd_forecast)

    p_net = sub.add_parser("export-network", help="edge lists from saved fit matrices")
    p_net.add_argument("--coefficients", required=True, help="b_hat.csv from a lagged fit")
    p_net.add_argument("--precision", required=True, help="omega_hat.csv from the same fit")
    p_net.add_argument("--names", default=None, help="comma-separated series names")
    p_net.add_argument("--lags", type=int, default=2)
    p_net.add_argument("--out", required=True, help="output directory")
    p_net.set_defaults(func=cmd_export_network)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, DefinitenessError, StabilityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConformanceError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GlcovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
