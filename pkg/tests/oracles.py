"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way: brute-force
loops, generic first-order optimization, and closed forms transcribed
directly from textbook formulas. Nothing imports package internals beyond
plain numpy arrays, so agreement between the two routes is meaningful.
"""

import numpy as np


def naive_loss(B, Omega, X, Y):
    """Quadratic-form loss via an explicit double loop over response pairs."""
    n = X.shape[0]
    R = Y - X @ B
    q = R.shape[1]
    total = 0.0
    for a in range(q):
        for b in range(q):
            total += float(R[:, a] @ R[:, b]) * Omega[b, a]
    return total / (2.0 * n)


def naive_residual_cov(X, Y, B):
    """Residual second-moment matrix as an explicit sum of outer products."""
    R = Y - X @ B
    n, q = R.shape
    S = np.zeros((q, q))
    for t in range(n):
        S += np.outer(R[t], R[t])
    return S / n


def fd_gradient(loss_fn, B, step_scale=1e-6):
    """Central finite differences of a scalar loss over the entries of B."""
    G = np.zeros_like(B)
    for i in range(B.shape[0]):
        for k in range(B.shape[1]):
            h = step_scale * (1.0 + abs(B[i, k]))
            forward = B.copy()
            forward[i, k] += h
            backward = B.copy()
            backward[i, k] -= h
            G[i, k] = (loss_fn(forward) - loss_fn(backward)) / (2.0 * h)
    return G


def group_objective(B, Omega, X, Y, labels, weights, sizes):
    """Loss plus weighted group penalty; infinite-weight groups must be zero."""
    value = naive_loss(B, Omega, X, Y)
    for j in range(len(weights)):
        norm = float(np.linalg.norm(B[labels == j]))
        if np.isinf(weights[j]):
            if norm > 0:
                return np.inf
            continue
        value += weights[j] * sizes[j] * norm
    return value


def prox_group_lasso(X, Y, Omega, labels, weights, tol=1e-13, max_iter=200000):
    """FISTA for the weighted group lasso with a fixed precision matrix.

    Minimizes (1/2n)tr((Y-XB)'(Y-XB)Omega) + sum_j w_j m_j ||B_Gj||_2 to
    high precision. Returns (B, objective). Restarts momentum whenever the
    objective rises, so the objective sequence is monotone.
    """
    n, p = X.shape
    q = Y.shape[1]
    K = int(labels.max()) + 1
    sizes = np.bincount(labels.ravel(), minlength=K)
    L = np.linalg.eigvalsh(X.T @ X).max() * np.linalg.eigvalsh(Omega).max() / n
    step = 1.0 / L

    def grad(B):
        return -(X.T @ ((Y - X @ B) @ Omega)) / n

    def prox(B):
        out = B.copy()
        for j in range(K):
            mask = labels == j
            if np.isinf(weights[j]):
                out[mask] = 0.0
                continue
            thr = step * weights[j] * sizes[j]
            norm = float(np.linalg.norm(out[mask]))
            if norm <= thr:
                out[mask] = 0.0
            else:
                out[mask] *= 1.0 - thr / norm
        return out

    def value(B):
        return group_objective(B, Omega, X, Y, weights=weights, labels=labels, sizes=sizes)

    B = np.zeros((p, q))
    Z = B.copy()
    t_momentum = 1.0
    best = value(B)
    stall = 0
    for _ in range(max_iter):
        B_next = prox(Z - step * grad(Z))
        f_next = value(B_next)
        if f_next > best:
            # restart from the last good point without momentum
            Z = B.copy()
            t_momentum = 1.0
            B_next = prox(Z - step * grad(Z))
            f_next = value(B_next)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_momentum**2)) / 2.0
        Z = B_next + ((t_momentum - 1.0) / t_next) * (B_next - B)
        B = B_next
        t_momentum = t_next
        if best - f_next <= tol * max(1.0, abs(best)):
            stall += 1
            if stall >= 20:
                break
        else:
            stall = 0
        best = min(best, f_next)
    return B, value(B)


def prox_lasso(X, y, lam, tol=1e-13, max_iter=200000):
    """Single-response lasso via the group oracle with singleton groups."""
    p = X.shape[1]
    labels = np.arange(p).reshape(p, 1)
    weights = np.full(p, lam)
    B, val = prox_group_lasso(X, y.reshape(-1, 1), np.eye(1), labels, weights,
                              tol=tol, max_iter=max_iter)
    return B.ravel(), val


def ar1_precision(q, rho):
    """Closed-form tridiagonal inverse of the AR(1) covariance rho^|i-j|."""
    if q == 1:
        return np.array([[1.0]])
    P = np.zeros((q, q))
    scale = 1.0 / (1.0 - rho**2)
    for k in range(q):
        if k == 0 or k == q - 1:
            P[k, k] = scale
        else:
            P[k, k] = (1.0 + rho**2) * scale
    for k in range(q - 1):
        P[k, k + 1] = -rho * scale
        P[k + 1, k] = -rho * scale
    return P


def companion_radius(b1, b2):
    """Spectral radius of the stacked first-order form of a two-lag recursion."""
    q = b1.shape[0]
    top = np.hstack([b1, b2])
    bottom = np.hstack([np.eye(q), np.zeros((q, q))])
    return float(np.abs(np.linalg.eigvals(np.vstack([top, bottom]))).max())
