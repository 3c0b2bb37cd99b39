"""Dense least-squares substrate with exact row-deletion analysis.

Everything here is deterministic linear algebra: thin SVD with a fixed
sign convention, leverage scores, full and row-deleted solves, and the
closed-form identity

    ||X w_minus - y||^2 = ||X w* - y||^2 + r^T Q r,

where r is the residual of the optimal fit on the deleted rows and
Q = (I - P)^{-1} P (I - P)^{-1} is built from the partial projection
P = U_A U_A^T of the deleted rows.  The identity lets the error of the
deleted-row regression be evaluated without ever solving the deficient
system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .errors import (
    MissingLabels,
    RankDeficient,
    SingularDeficientSystem,
    ZeroRow,
)

# Numeric policy.  The model assumes exact full rank; these are the
# float64 stand-ins (see README for how to tighten or loosen them).
RANK_TOL = 1e-12            # relative sigma_d / sigma_1 cutoff
SPEC_SINGULAR_TOL = 1e-10   # ||P_A||_2 above 1 - tol counts as rank loss
LEVERAGE_FLOOR = 1e-14      # clamp for leverage scores


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Design matrix with optional labels.

    Requires n > d >= 1, no zero rows, finite entries.  Full column rank
    is enforced when the SVD is taken (see :func:`thin_svd`).
    """

    X: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if not (n > d >= 1):
            raise ValueError(f"need n > d >= 1, got n={n}, d={d}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        row_norms = np.einsum("ij,ij->i", X, X)
        if np.any(row_norms == 0.0):
            raise ZeroRow(f"zero rows at indices {np.flatnonzero(row_norms == 0.0)}")
        object.__setattr__(self, "X", _frozen(X))
        if self.y is not None:
            y = np.asarray(self.y, dtype=float)
            if y.shape != (n,):
                raise ValueError(f"y must have shape ({n},), got {y.shape}")
            if not np.all(np.isfinite(y)):
                raise ValueError("y contains non-finite entries")
            object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def require_labels(self) -> np.ndarray:
        if self.y is None:
            raise MissingLabels("dataset has no labels")
        return self.y


@dataclass(frozen=True)
class ThinSvd:
    """Thin SVD X = U diag(sigma) V^T with orthonormal U columns."""

    U: np.ndarray       # (n, d)
    sigma: np.ndarray   # (d,) positive, nonincreasing
    V: np.ndarray       # (d, d) orthogonal

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        V = np.asarray(self.V, dtype=float)
        n, d = U.shape
        if sigma.shape != (d,) or V.shape != (d, d):
            raise ValueError("inconsistent factor shapes")
        if not np.all(sigma > 0.0):
            raise RankDeficient("nonpositive singular value")
        if np.any(np.diff(sigma) > 0.0):
            raise ValueError("singular values must be nonincreasing")
        eye = np.eye(d)
        if np.max(np.abs(U.T @ U - eye)) > 1e-10:
            raise ValueError("U columns are not orthonormal to 1e-10")
        if np.max(np.abs(V.T @ V - eye)) > 1e-10:
            raise ValueError("V is not orthogonal to 1e-10")
        object.__setattr__(self, "U", _frozen(U))
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "V", _frozen(V))

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def condition_number(self) -> float:
        return float(self.sigma[0] / self.sigma[-1])

    @property
    def scaled_condition_sq(self) -> float:
        """sum_i (sigma_1 / sigma_i)^2, between d and 1 + (d-1) kappa^2."""
        return float(np.sum((self.sigma[0] / self.sigma) ** 2))

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


@dataclass(frozen=True)
class LeverageProfile:
    """Per-row leverage scores with derived summary quantities.

    ``coherence_mu`` is the mean inverse leverage; ``z1`` is the
    normalizer of the single-row influence distribution,
    sum_i (1 - ell_i)^2 / ell_i.
    """

    ell: np.ndarray
    coherence_mu: float
    z1: float

    def __post_init__(self):
        ell = np.asarray(self.ell, dtype=float)
        if ell.ndim != 1 or np.any(ell <= 0.0) or np.any(ell > 1.0):
            raise ValueError("leverage scores must lie in (0, 1]")
        object.__setattr__(self, "ell", _frozen(ell))

    @classmethod
    def from_scores(cls, ell: np.ndarray) -> "LeverageProfile":
        ell = np.clip(np.asarray(ell, dtype=float), LEVERAGE_FLOOR, 1.0)
        mu = float(np.mean(1.0 / ell))
        z1 = float(np.sum((1.0 - ell) ** 2 / ell))
        return cls(ell=ell, coherence_mu=mu, z1=z1)

    @property
    def n(self) -> int:
        return self.ell.shape[0]


@dataclass(frozen=True)
class RowSubset:
    """A set of row indices, stored sorted ascending."""

    indices: Tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) < 1:
            raise ValueError("subset must be nonempty")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if idx[0] < 0:
            raise ValueError("negative index")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, indices: Iterable[int], n: Optional[int] = None) -> "RowSubset":
        idx = sorted(int(i) for i in indices)
        sub = cls(tuple(idx))
        if n is not None and (sub.indices[-1] >= n):
            raise ValueError(f"index {sub.indices[-1]} out of range for n={n}")
        return sub

    @property
    def k(self) -> int:
        return len(self.indices)

    def array(self) -> np.ndarray:
        return np.array(self.indices, dtype=np.intp)


@dataclass(frozen=True)
class DeficientFit:
    """Result of the regression with a row subset deleted.

    ``full_error`` is evaluated on the complete dataset and
    ``error_increase`` is its excess over the optimal error.
    """

    w_minus: np.ndarray
    full_error: float
    error_increase: float


def thin_svd(data: Dataset, rank_tol: float = RANK_TOL) -> ThinSvd:
    """Thin SVD of the design matrix with a deterministic sign convention.

    Each column of U is flipped so that its largest-magnitude entry is
    positive (ties broken by lowest row index); V columns flip in step so
    the product is unchanged.
    """
    U, s, Vt = np.linalg.svd(data.X, full_matrices=False)
    if s[-1] < rank_tol * s[0]:
        raise RankDeficient(
            f"sigma_d/sigma_1 = {s[-1] / s[0]:.3e} below tolerance {rank_tol:.1e}"
        )
    pick = np.argmax(np.abs(U), axis=0)
    signs = np.where(U[pick, np.arange(U.shape[1])] < 0.0, -1.0, 1.0)
    U = U * signs
    Vt = Vt * signs[:, None]
    return ThinSvd(U=U, sigma=s, V=Vt.T)


def leverage_scores(svd: ThinSvd) -> LeverageProfile:
    """Leverage of each row: squared norm of the corresponding row of U."""
    ell = np.einsum("ij,ij->i", svd.U, svd.U)
    return LeverageProfile.from_scores(ell)


def full_solve(data: Dataset, svd: Optional[ThinSvd] = None):
    """Optimal weights and optimal squared error via the pseudo-inverse.

    Returns ``(w_star, opt_error)`` with w* = V diag(1/sigma) U^T y.
    """
    y = data.require_labels()
    if svd is None:
        svd = thin_svd(data)
    w_star = svd.V @ ((svd.U.T @ y) / svd.sigma)
    resid = data.X @ w_star - y
    return w_star, float(resid @ resid)


def partial_projection_norm(svd: ThinSvd, subset: RowSubset) -> float:
    """Spectral norm of the partial projection U_A U_A^T, in [0, 1].

    Computed as the top eigenvalue of the Gram matrix on the smaller of
    the k- and d-sized sides.
    """
    idx = subset.array()
    if idx[-1] >= svd.n:
        raise ValueError(f"index {idx[-1]} out of range for n={svd.n}")
    UA = svd.U[idx]
    if subset.k <= svd.d:
        gram = UA @ UA.T
    else:
        gram = UA.T @ UA
    top = np.linalg.eigvalsh(gram)[-1]
    return float(min(max(top, 0.0), 1.0))


def _partial_projection(svd: ThinSvd, subset: RowSubset):
    """k x k partial projection and its spectral norm."""
    UA = svd.U[subset.array()]
    P = UA @ UA.T
    if subset.k <= svd.d:
        spec = np.linalg.eigvalsh(P)[-1]
    else:
        spec = np.linalg.eigvalsh(UA.T @ UA)[-1]
    return P, float(min(max(spec, 0.0), 1.0))


def deficient_solve(
    data: Dataset, subset: RowSubset, svd: Optional[ThinSvd] = None
) -> DeficientFit:
    """Least-squares weights with the subset's rows deleted.

    Implemented as a rank-k downdate of the full solution:
    w_minus = w* + (X^T X)^{-1} A^T (I_k - P_A)^{-1} (A w* - y_A).
    Requires ||P_A||_2 <= 1 - 1e-10, otherwise the reduced system has
    lost column rank.
    """
    y = data.require_labels()
    if svd is None:
        svd = thin_svd(data)
    w_star, opt_error = full_solve(data, svd)
    P, spec = _partial_projection(svd, subset)
    if spec > 1.0 - SPEC_SINGULAR_TOL:
        raise SingularDeficientSystem(
            f"||P_A||_2 = {spec:.15f}; deleting rows {subset.indices} "
            "destroys full rank"
        )
    idx = subset.array()
    A = data.X[idx]
    resid_A = A @ w_star - y[idx]
    z = np.linalg.solve(np.eye(subset.k) - P, resid_A)
    # (X^T X)^{-1} A^T z  =  V diag(1/sigma^2) V^T A^T z
    w_minus = w_star + svd.V @ ((svd.V.T @ (A.T @ z)) / svd.sigma**2)
    full_resid = data.X @ w_minus - y
    full_error = float(full_resid @ full_resid)
    return DeficientFit(
        w_minus=_frozen(w_minus),
        full_error=full_error,
        error_increase=full_error - opt_error,
    )


def leave_A_out_error(
    data: Dataset,
    subset: RowSubset,
    svd: Optional[ThinSvd] = None,
    full=None,
) -> float:
    """Closed-form full-data error of the deleted-rows regression.

    Evaluates opt_error + r^T Q r with Q = (I-P)^{-1} P (I-P)^{-1} and
    r = A w* - y_A; the deficient system is never solved.  ``full`` may
    carry a precomputed ``(w_star, opt_error)`` pair.
    """
    y = data.require_labels()
    if svd is None:
        svd = thin_svd(data)
    if full is None:
        full = full_solve(data, svd)
    w_star, opt_error = full
    P, spec = _partial_projection(svd, subset)
    if spec > 1.0 - SPEC_SINGULAR_TOL:
        raise SingularDeficientSystem(
            f"||P_A||_2 = {spec:.15f} for rows {subset.indices}"
        )
    idx = subset.array()
    resid_A = data.X[idx] @ w_star - y[idx]
    z = np.linalg.solve(np.eye(subset.k) - P, resid_A)
    increase = float(z @ (P @ z))
    return opt_error + increase
