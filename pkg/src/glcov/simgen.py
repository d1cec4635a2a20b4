"""Simulation designs, data generators, and estimation-error metrics.

Two designs are provided.  The categorical design draws correlated latent
normals, trichotomizes them into three-level factors, and encodes each
factor as a dummy pair whose two cells per response form one group.  The
var2 design simulates a second-order vector autoregression whose lag
matrices share the support of a scale-free network; both lags of one
series within one equation form a group.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import GroupedCoefficients, GroupPartition
from .estimator import EstimatorKind, fit
from .exceptions import ConfigurationError, ConformanceError, InputError, StabilityError

DESIGNS = ("categorical", "var2")
SIGMA_KINDS = ("sparse", "diagonal", "dense")
SPECTRAL_RADIUS_LIMIT = 0.99
BURN_IN = 200


def stream(seed, rep):
    """Counter-based RNG stream for one replication.

    Stream (seed, rep) is fixed regardless of how many replications run or
    in which order, so any single replication can be reproduced alone.
    """
    return np.random.Generator(np.random.Philox(key=[int(seed) % 2**64, int(rep)]))


@dataclass(frozen=True)
class Scenario:
    """Flat description of one Monte Carlo setting."""

    design: str
    sigma: str
    rho: float = 0.0
    n: int = 50
    categorical_vars: int = 5
    responses: int = 5
    timepoints: int = 50
    replications: int = 100
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ConfigurationError(f"unknown design {self.design!r} (known: {DESIGNS})")
        if self.sigma not in SIGMA_KINDS:
            raise ConfigurationError(f"unknown sigma kind {self.sigma!r} (known: {SIGMA_KINDS})")
        if self.sigma == "sparse" and not (-1.0 < self.rho < 1.0):
            raise ConfigurationError("rho must lie strictly between -1 and 1")
        if self.n < 1 or self.responses < 1 or self.replications < 1:
            raise ConfigurationError("n, responses, and replications must be positive")
        if self.design == "categorical" and self.categorical_vars < 1:
            raise ConfigurationError("categorical_vars must be positive")
        if self.design == "var2":
            if self.responses < 2:
                raise ConfigurationError("var2 needs at least two series")
            if self.timepoints < 3:
                raise ConfigurationError("var2 needs at least three time points")

    @property
    def label(self):
        if self.name:
            return self.name
        tag = f"{self.design}-{self.sigma}"
        if self.sigma == "sparse":
            tag += f"-{self.rho:g}"
        return tag


SCENARIO_KEYS = {
    "design": str,
    "sigma": str,
    "rho": float,
    "n": int,
    "categorical_vars": int,
    "responses": int,
    "timepoints": int,
    "replications": int,
    "seed": int,
    "name": str,
}


def parse_scenario(text, path=None):
    """Parse the flat ``key = value`` scenario format."""
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError("expected 'key = value'", path=path, line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCENARIO_KEYS:
            raise InputError(f"unknown scenario key {key!r}", path=path, line=lineno)
        if key in fields:
            raise InputError(f"duplicate scenario key {key!r}", path=path, line=lineno)
        try:
            fields[key] = SCENARIO_KEYS[key](value)
        except ValueError:
            raise InputError(
                f"bad value {value!r} for {key}", path=path, line=lineno
            ) from None
    for required in ("design", "sigma"):
        if required not in fields:
            raise InputError(f"missing scenario key {required!r}", path=path)
    try:
        return Scenario(**fields)
    except ConfigurationError as exc:
        raise InputError(str(exc), path=path) from None


def read_scenario(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return parse_scenario(handle.read(), path=path)
    except OSError as exc:
        raise InputError(f"cannot read scenario: {exc.strerror}", path=path) from None


def write_scenario(scenario, path):
    lines = []
    for key in SCENARIO_KEYS:
        value = getattr(scenario, key)
        if key == "name" and not value:
            continue
        lines.append(f"{key} = {value}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def make_sigma(kind, q, rho=0.0):
    """Error covariance of the requested structure, validated PD.

    sparse:   sigma_ij = rho^|i-j|, whose inverse is tridiagonal
    diagonal: the identity
    dense:    unit-diagonal long-memory autocovariance
              0.5 * ((d+1)^1.8 - 2 d^1.8 + (d-1)^1.8) at distance d,
              with the bases taken in absolute value
    """
    if q < 1:
        raise ConfigurationError("q must be positive")
    d = np.abs(np.subtract.outer(np.arange(q), np.arange(q))).astype(np.float64)
    if kind == "sparse":
        if not (-1.0 < rho < 1.0):
            raise ConfigurationError("rho must lie strictly between -1 and 1")
        sigma = rho**d
    elif kind == "diagonal":
        sigma = np.eye(q)
    elif kind == "dense":
        expo = 1.8
        sigma = 0.5 * (np.abs(d + 1) ** expo - 2 * d**expo + np.abs(d - 1) ** expo)
    else:
        raise ConfigurationError(f"unknown sigma kind {kind!r} (known: {SIGMA_KINDS})")
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ConfigurationError(f"{kind} covariance is not positive definite") from None
    return sigma


@dataclass(frozen=True)
class GroundTruth:
    """True coefficients and error covariance behind one design."""

    coefficients: GroupedCoefficients
    sigma: np.ndarray
    adjacency: np.ndarray = None
    b1: np.ndarray = None
    b2: np.ndarray = None
    redraws: int = 0


def categorical_partition(K, q):
    """Dummy pair (2a, 2a+1) of factor a in response k forms group a*q + k."""
    labels = np.empty((2 * K, q), dtype=np.int64)
    for a in range(K):
        labels[2 * a] = labels[2 * a + 1] = np.arange(q) + a * q
    return GroupPartition(labels)


def categorical_truth(K, q, sigma=None):
    """Block-diagonal truth: response k loads (2, -1, ...) on its own rows.

    The stacked coefficient matrix is kron(I_q, b) transposed, with b the
    alternating (2, -1) pattern of length 2K/q, so 2K must be a multiple
    of q and the ratio even.
    """
    p = 2 * K
    if p % q != 0 or (p // q) % 2 != 0:
        raise ConfigurationError(
            f"categorical truth needs 2K divisible by q with an even ratio, got K={K}, q={q}"
        )
    width = p // q
    b = np.tile([2.0, -1.0], width // 2)
    B = np.kron(np.eye(q), b[None, :]).T
    coefficients = GroupedCoefficients(B, categorical_partition(K, q))
    if sigma is None:
        sigma = np.eye(q)
    return GroundTruth(coefficients=coefficients, sigma=sigma)


def gen_categorical(n, K, rng):
    """Trichotomized correlated normals as dummy pairs.

    Latents are centered normals with covariance 0.5^|i-j| across the K
    factors.  Values below the lower tercile map to category 0, above the
    upper tercile to category 1, the middle band to category 2; dummies
    indicate categories 0 and 1 and are interleaved per factor.  Returns
    (X, categories).
    """
    rng = np.random.default_rng(rng)
    cov = 0.5 ** np.abs(np.subtract.outer(np.arange(K), np.arange(K)))
    L = np.linalg.cholesky(cov)
    Z = rng.standard_normal((n, K)) @ L.T
    lo, hi = stats.norm.ppf(1.0 / 3.0), stats.norm.ppf(2.0 / 3.0)
    C = np.where(Z < lo, 0, np.where(Z > hi, 1, 2)).astype(np.int64)
    X = np.zeros((n, 2 * K))
    X[:, 0::2] = C == 0
    X[:, 1::2] = C == 1
    return X, C


def gen_scale_free_adjacency(q, rng):
    """Directed scale-free network grown by preferential attachment.

    Two randomly chosen nodes start with a bidirectional edge; each of the
    remaining q-2 nodes joins in random order, attaching to an existing
    node with probability proportional to its undirected degree, with a
    uniformly random edge direction.  The result has exactly q directed
    edges and no self-loops.
    """
    if q < 2:
        raise ConfigurationError("scale-free network needs at least two nodes")
    rng = np.random.default_rng(rng)
    A = np.zeros((q, q), dtype=np.int64)
    degree = np.zeros(q)
    first, second = rng.choice(q, size=2, replace=False)
    A[first, second] = A[second, first] = 1
    degree[first] = degree[second] = 1.0
    remaining = [node for node in range(q) if node not in (first, second)]
    order = rng.permutation(len(remaining))
    for idx in order:
        node = remaining[idx]
        probs = degree / degree.sum()
        target = rng.choice(q, p=probs)
        if rng.random() < 0.5:
            A[node, target] = 1
        else:
            A[target, node] = 1
        degree[node] += 1.0
        degree[target] += 1.0
    return A


def companion_spectral_radius(b1, b2):
    q = b1.shape[0]
    top = np.hstack([b1, b2])
    bottom = np.hstack([np.eye(q), np.zeros((q, q))])
    return float(np.abs(np.linalg.eigvals(np.vstack([top, bottom]))).max())


def var2_truth(q, rng, sigma=None, max_redraws=1000):
    """Lag matrices 0.4*A and 0.2*A on a freshly drawn scale-free support.

    Networks whose companion spectral radius reaches the stationarity
    guard are redrawn from the same stream; the number of redraws is
    recorded.
    """
    rng = np.random.default_rng(rng)
    for redraws in range(max_redraws + 1):
        A = gen_scale_free_adjacency(q, rng)
        b1, b2 = 0.4 * A, 0.2 * A
        if companion_spectral_radius(b1, b2) < SPECTRAL_RADIUS_LIMIT:
            break
    else:
        raise StabilityError(f"no stationary network after {max_redraws} redraws")
    if sigma is None:
        sigma = np.eye(q)
    coefficients = GroupedCoefficients(
        np.vstack([b1.T, b2.T]), GroupPartition.var_lags(q, lags=2)
    )
    return GroundTruth(
        coefficients=coefficients, sigma=sigma, adjacency=A, b1=b1, b2=b2, redraws=redraws
    )


def simulate_var2(b1, b2, sigma, T, rng, burn_in=BURN_IN):
    """Simulate y_t = b1 y_{t-1} + b2 y_{t-2} + e_t from zero starts.

    Errors are centered normals with covariance ``sigma``; the first
    ``burn_in`` points are discarded.  Raises when the companion matrix is
    not stable.
    """
    b1, b2 = np.asarray(b1, dtype=np.float64), np.asarray(b2, dtype=np.float64)
    q = b1.shape[0]
    if b1.shape != (q, q) or b2.shape != (q, q):
        raise ConformanceError("lag matrices must be square and equally sized")
    if T < 1 or burn_in < 0:
        raise ConfigurationError("T must be positive and burn_in non-negative")
    radius = companion_spectral_radius(b1, b2)
    if radius >= 1.0:
        raise StabilityError(f"companion spectral radius {radius:.4f} is not below one")
    rng = np.random.default_rng(rng)
    L = np.linalg.cholesky(np.asarray(sigma, dtype=np.float64))
    e = rng.standard_normal((burn_in + T, q)) @ L.T
    y = np.zeros((burn_in + T + 2, q))
    for t in range(burn_in + T):
        y[t + 2] = b1 @ y[t + 1] + b2 @ y[t] + e[t]
    return y[2 + burn_in:]


def var_to_regression(series, lags=2):
    """Stack a T-by-q series into the lagged regression (X, Y, partition).

    Row t of X is (y_{t-1}, ..., y_{t-lags}) concatenated, so estimated
    coefficients live in a (lags*q)-by-q matrix whose block l holds the
    transposed lag-(l+1) matrix.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 2:
        raise ConformanceError("series must be a T-by-q matrix")
    T, q = series.shape
    if T <= lags:
        raise ConformanceError(f"need more than {lags} time points, got {T}")
    Y = series[lags:]
    X = np.hstack([series[lags - l: T - l] for l in range(1, lags + 1)])
    return X, Y, GroupPartition.var_lags(q, lags=lags)


def regression_to_var(B, lags=2):
    """Split stacked regression coefficients back into lag matrices."""
    values = B.values if isinstance(B, GroupedCoefficients) else np.asarray(B)
    p, q = values.shape
    if p != lags * q:
        raise ConformanceError(f"stacked coefficients must be ({lags}*q)-by-q, got {values.shape}")
    return [values[l * q:(l + 1) * q].T for l in range(lags)]


def metrics(b_hat, b_true):
    """Mean absolute estimation error and support recovery rates.

    TPR is the share of truly non-zero cells estimated non-zero, TNR the
    share of truly zero cells estimated zero; either is an error to ask
    for when its reference set is empty.
    """
    b_hat = b_hat.values if isinstance(b_hat, GroupedCoefficients) else np.asarray(b_hat)
    b_true = b_true.values if isinstance(b_true, GroupedCoefficients) else np.asarray(b_true)
    if b_hat.shape != b_true.shape:
        raise ConformanceError(f"shape mismatch {b_hat.shape} vs {b_true.shape}")
    maee = float(np.abs(b_hat - b_true).mean())
    true_nz = b_true != 0
    true_z = ~true_nz
    if not true_nz.any():
        raise ConformanceError("TPR undefined: no true non-zero cells")
    if not true_z.any():
        raise ConformanceError("TNR undefined: no true zero cells")
    tpr = float((b_hat[true_nz] != 0).mean())
    tnr = float((b_hat[true_z] == 0).mean())
    return {"maee": maee, "tpr": tpr, "tnr": tnr}


def generate_dataset(scenario, rep):
    """Materialize replication ``rep`` of a scenario.

    Returns (X, Y, partition, truth).  All randomness comes from the
    replication stream, consumed in a fixed order: network redraws (var2),
    then design, then errors.
    """
    rng = stream(scenario.seed, rep)
    q = scenario.responses
    sigma = make_sigma(scenario.sigma, q, scenario.rho)
    if scenario.design == "categorical":
        truth = categorical_truth(scenario.categorical_vars, q, sigma=sigma)
        X, _ = gen_categorical(scenario.n, scenario.categorical_vars, rng)
        E = rng.standard_normal((scenario.n, q)) @ np.linalg.cholesky(sigma).T
        Y = X @ truth.coefficients.values + E
        return X, Y, truth.coefficients.partition, truth
    truth = var2_truth(q, rng, sigma=sigma)
    series = simulate_var2(truth.b1, truth.b2, sigma, scenario.timepoints, rng)
    X, Y, partition = var_to_regression(series)
    return X, Y, partition, truth


def run_replication(scenario, rep, estimators, settings=None):
    """Fit every requested estimator on one replication; returns row dicts."""
    X, Y, partition, truth = generate_dataset(scenario, rep)
    rows = []
    for est in estimators:
        kind = EstimatorKind.parse(est) if isinstance(est, str) else est
        report = fit(kind, X, Y, partition, settings=settings)
        m = metrics(report.coefficients, truth.coefficients)
        rows.append(
            {
                "scenario": scenario.label,
                "estimator": kind.value,
                "replication": rep,
                "maee": m["maee"],
                "tpr": m["tpr"],
                "tnr": m["tnr"],
            }
        )
    return rows


def _replication_worker(args):
    scenario, rep, names = args
    return run_replication(scenario, rep, names)


def run_scenario(scenario, estimators, replications=None, n_jobs=1):
    """All replications of a scenario, rows sorted by (estimator, replication)."""
    reps = scenario.replications if replications is None else int(replications)
    if reps < 1:
        raise ConfigurationError("replications must be positive")
    names = [EstimatorKind.parse(e).value if isinstance(e, str) else e.value for e in estimators]
    if n_jobs and n_jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            chunks = list(pool.map(_replication_worker, [(scenario, r, names) for r in range(reps)]))
    else:
        chunks = [run_replication(scenario, r, names) for r in range(reps)]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda row: (row["estimator"], row["replication"]))
    return rows


def summarize(rows):
    """Per-estimator means of the metric columns, sorted by estimator."""
    by_est = {}
    for row in rows:
        by_est.setdefault(row["estimator"], []).append(row)
    out = []
    for est in sorted(by_est):
        group = by_est[est]
        out.append(
            {
                "estimator": est,
                "replications": len(group),
                "maee": float(np.mean([r["maee"] for r in group])),
                "tpr": float(np.mean([r["tpr"] for r in group])),
                "tnr": float(np.mean([r["tnr"] for r in group])),
            }
        )
    return out


def paired_ttest(rows, estimator_a, estimator_b, metric="maee"):
    """Paired t-test of ``metric`` between two estimators across replications."""
    series = {}
    for row in rows:
        series.setdefault(row["estimator"], {})[row["replication"]] = row[metric]
    if estimator_a not in series or estimator_b not in series:
        raise ConformanceError("both estimators must be present in the rows")
    common = sorted(set(series[estimator_a]) & set(series[estimator_b]))
    if len(common) < 2:
        raise ConformanceError("need at least two paired replications")
    a = np.array([series[estimator_a][r] for r in common])
    b = np.array([series[estimator_b][r] for r in common])
    result = stats.ttest_rel(a, b)
    return {
        "comparison": f"{estimator_a}-{estimator_b}",
        "metric": metric,
        "t_statistic": float(result.statistic),
        "p_value": float(result.pvalue),
        "pairs": len(common),
        "mean_difference": float((a - b).mean()),
    }
