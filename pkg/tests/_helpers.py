"""Shared test utilities: independent oracles and instance generators.

The oracles here deliberately use different computational paths than the
library (explicit inverses, power iteration, direct least squares) so
agreement is evidence, not tautology.
"""

import numpy as np

from cullsq import Dataset


def random_orthonormal(n, d, gen):
    Q, _ = np.linalg.qr(gen.standard_normal((n, d)))
    return Q


def random_dataset(n, d, gen, noise=1.0):
    X = gen.standard_normal((n, d))
    w0 = gen.standard_normal(d)
    y = X @ w0 + (noise * gen.standard_normal(n) if noise else 0.0)
    return Dataset(X=X, y=y)


def hat_matrix_diag(X):
    """Leverage oracle: diagonal of X (X^T X)^{-1} X^T via explicit inverse."""
    H = X @ np.linalg.inv(X.T @ X) @ X.T
    return np.diag(H).copy()


def normal_equations(X, y):
    """Least-squares oracle via the normal equations."""
    return np.linalg.solve(X.T @ X, X.T @ y)


def power_iteration_top_eig(M, max_iters=20000, tol=1e-15):
    """Top eigenvalue of a symmetric PSD matrix by power iteration."""
    M = np.asarray(M, dtype=float)
    v = np.ones(M.shape[0]) / np.sqrt(M.shape[0])
    prev = 0.0
    for _ in range(max_iters):
        w = M @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        eig = float(v @ (M @ v))
        if abs(eig - prev) <= tol * max(1.0, abs(eig)):
            return eig
        prev = eig
    return prev


def deficient_lstsq(X, y, indices):
    """Direct oracle: least squares on the rows that remain."""
    keep = np.setdiff1d(np.arange(X.shape[0]), np.asarray(indices))
    w = np.linalg.lstsq(X[keep], y[keep], rcond=None)[0]
    resid = X @ w - y
    return w, float(resid @ resid)
