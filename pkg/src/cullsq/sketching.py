"""Subspace-embedding sketches, preconditioners, and fast leverage scores.

Two sketch families are provided:

* dense sign: entries drawn uniformly from {-1/sqrt(r), +1/sqrt(r)};
* SRHT: zero-pad to a power of two, flip signs, fast Walsh-Hadamard
  transform, subsample r coordinates without replacement, rescale by
  sqrt(n_pad / r).

An operator Pi is an eps-embedding for an orthonormal U when
``||I - (Pi U)^T (Pi U)||_2 <= eps``; :func:`embedding_defect` measures
that quantity and :func:`embedding_property_report` evaluates the
standard consequences (singular-value deviation, pseudo-inverse bounds).

A QR factorization with column pivoting of the sketched matrix yields a
triangular-times-permutation preconditioner R = T P whose inverse
applies in O(d^2); the singular values of X R^{-1} are exactly the
inverses of those of Pi U (reversed), so X R^{-1} inherits the sketch's
conditioning.  Row norms of X R^{-1}, optionally compressed once more by
a second sketch acting on the d-dimensional row space, give constant
relative-error approximations to the leverage scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InvalidDimension, SketchRankDeficient
from .rng import as_generator

DENSE_SIGN = "dense_sign"
SRHT = "srht"
IDENTITY = "identity"


def next_pow2(n: int) -> int:
    if n < 1:
        raise InvalidDimension("dimension must be positive")
    return 1 << (n - 1).bit_length()


def fwht(M: np.ndarray) -> np.ndarray:
    """Normalized fast Walsh-Hadamard transform along axis 0.

    Orthogonal (self-inverse) Sylvester ordering; the leading dimension
    must be a power of two.
    """
    a = np.array(M, dtype=float)
    shape = a.shape
    n = shape[0]
    if n & (n - 1):
        raise InvalidDimension(f"leading dimension {n} is not a power of two")
    a = a.reshape(n, -1)
    h = 1
    while h < n:
        a = a.reshape(n // (2 * h), 2, h, -1)
        top = a[:, 0] + a[:, 1]
        bot = a[:, 0] - a[:, 1]
        a = np.stack((top, bot), axis=1).reshape(n, -1)
        h *= 2
    return (a / math.sqrt(n)).reshape(shape)


def hadamard_columns(n: int, d: int) -> np.ndarray:
    """First d columns of the n x n normalized Hadamard matrix."""
    if n & (n - 1):
        raise InvalidDimension(f"n={n} is not a power of two")
    if not (1 <= d <= n):
        raise InvalidDimension(f"d={d} out of range for n={n}")
    basis = np.zeros((n, d))
    basis[np.arange(d), np.arange(d)] = 1.0
    return fwht(basis)


@dataclass(frozen=True)
class SketchOperator:
    """A linear sketch acting from the left on matrices with n_in rows."""

    kind: str
    n_in: int
    r: int
    matrix: Optional[np.ndarray] = None   # dense sign only, (r, n_in)
    n_pad: Optional[int] = None           # SRHT only
    signs: Optional[np.ndarray] = None    # SRHT only, (n_pad,)
    coords: Optional[np.ndarray] = None   # SRHT only, (r,) distinct


def jlt_dim(n: int, eps: float, beta: float) -> int:
    """Embedding dimension for the dense sign sketch good for n points:
    ceil((8 + 4 beta) / (eps^2 - 2 eps^3 / 3) * ln(n + 1))."""
    if not (0.0 < eps < 1.0) or beta <= 0.0 or n < 1:
        raise InvalidDimension("need 0 < eps < 1, beta > 0, n >= 1")
    return int(math.ceil((8.0 + 4.0 * beta) / (eps**2 - 2.0 * eps**3 / 3.0) * math.log(n + 1.0)))


def srht_dim(n: int, d: int, eps: float, gamma: float) -> int:
    """SRHT embedding dimension ensuring an eps-embedding for a
    d-dimensional subspace of R^n with probability 1 - gamma:
    ceil((12 / (5 eps^2)) (sqrt(d) + sqrt(8 ln(3 n / gamma)))^2 ln d).

    Note: at desk scale this often exceeds n, in which case callers cap
    the dimension at the padded size (the sketch is then orthogonal and
    the embedding exact).
    """
    if not (0.0 < eps <= 0.5) or not (0.0 < gamma < 1.0) or n < 1 or d < 1:
        raise InvalidDimension("need 0 < eps <= 1/2, 0 < gamma < 1, n, d >= 1")
    val = (12.0 / (5.0 * eps**2)) * (
        math.sqrt(d) + math.sqrt(8.0 * math.log(3.0 * n / gamma))
    ) ** 2 * math.log(d)
    return max(1, int(math.ceil(val)))


def make_dense_sign_jlt(n_in: int, r: int, rng) -> SketchOperator:
    """Dense sign sketch with entries +-1/sqrt(r)."""
    if r < 1 or n_in < 1:
        raise InvalidDimension(f"invalid dimensions n_in={n_in}, r={r}")
    gen = as_generator(rng)
    signs = gen.integers(0, 2, size=(r, n_in)).astype(float) * 2.0 - 1.0
    return SketchOperator(kind=DENSE_SIGN, n_in=n_in, r=r, matrix=signs / math.sqrt(r))


def make_srht(n_in: int, r: int, rng) -> SketchOperator:
    """SRHT sketch: signs, Hadamard transform, and r coordinates sampled
    without replacement from the padded dimension."""
    if n_in < 1:
        raise InvalidDimension(f"invalid input dimension {n_in}")
    n_pad = next_pow2(n_in)
    if not (1 <= r <= n_pad):
        raise InvalidDimension(f"need 1 <= r <= n_pad={n_pad}, got r={r}")
    gen = as_generator(rng)
    signs = gen.integers(0, 2, size=n_pad).astype(float) * 2.0 - 1.0
    coords = np.sort(gen.choice(n_pad, size=r, replace=False))
    return SketchOperator(
        kind=SRHT, n_in=n_in, r=r, n_pad=n_pad, signs=signs, coords=coords
    )


def make_identity_sketch(n_in: int) -> SketchOperator:
    """The exact (no-op) sketch; useful as the zero-error reference."""
    if n_in < 1:
        raise InvalidDimension(f"invalid input dimension {n_in}")
    return SketchOperator(kind=IDENTITY, n_in=n_in, r=n_in)


def apply_sketch(op: SketchOperator, M: np.ndarray) -> np.ndarray:
    """Apply the sketch to a matrix with op.n_in rows (returns r rows)."""
    M = np.asarray(M, dtype=float)
    squeeze = M.ndim == 1
    if squeeze:
        M = M[:, None]
    if M.ndim != 2 or M.shape[0] != op.n_in:
        raise DimensionMismatch(
            f"operator expects {op.n_in} rows, got array of shape {M.shape}"
        )
    if op.kind == IDENTITY:
        out = M.copy()
    elif op.kind == DENSE_SIGN:
        out = op.matrix @ M
    elif op.kind == SRHT:
        padded = np.zeros((op.n_pad, M.shape[1]))
        padded[: op.n_in] = M
        padded *= op.signs[:, None]
        transformed = fwht(padded)
        out = transformed[op.coords] * math.sqrt(op.n_pad / op.r)
    else:
        raise InvalidDimension(f"unknown sketch kind {op.kind!r}")
    return out[:, 0] if squeeze else out


def embedding_defect(sketched_u: np.ndarray) -> float:
    """||I - (Pi U)^T (Pi U)||_2 for an already-sketched orthonormal U."""
    PU = np.asarray(sketched_u, dtype=float)
    d = PU.shape[1]
    gram = PU.T @ PU
    eigs = np.linalg.eigvalsh(np.eye(d) - gram)
    return float(np.max(np.abs(eigs)))


def jlt_defect(op: SketchOperator, U: np.ndarray) -> float:
    """Embedding defect of the operator on an orthonormal-column U."""
    return embedding_defect(apply_sketch(op, U))


def embedding_property_report(sketched_u: np.ndarray) -> dict:
    """Measured consequences of an embedding with defect e < 1.

    Returns the defect plus the quantities bounded by the standard
    implications: singular-value deviation (<= e), ||S - S^{-1}|| and
    ||pinv - transpose|| (<= e/sqrt(1-e)), ||I - S^{-2}|| and
    ||I - pinv pinv^T|| (<= e/(1-e)), along with the rank.
    """
    PU = np.asarray(sketched_u, dtype=float)
    d = PU.shape[1]
    defect = embedding_defect(PU)
    svals = np.linalg.svd(PU, compute_uv=False)
    report = {
        "defect": defect,
        "rank": int(np.sum(svals > 0.0)),
        "sv_deviation": float(np.max(np.abs(1.0 - svals**2))),
    }
    if svals[-1] > 0.0:
        report["sigma_minus_inverse"] = float(np.max(np.abs(svals - 1.0 / svals)))
        report["one_minus_inv_sq"] = float(np.max(np.abs(1.0 - svals**-2)))
        pinv = np.linalg.pinv(PU)
        report["pinv_minus_transpose"] = float(
            np.linalg.norm(pinv - PU.T, ord=2)
        )
        report["pinv_gram_deviation"] = float(
            np.linalg.norm(np.eye(d) - pinv @ pinv.T, ord=2)
        )
    return report


def check_embedding_properties(sketched_u: np.ndarray, slack: float = 1e-8) -> dict:
    """Evaluate the embedding-consequence bounds with the measured defect
    substituted for eps.  Only applicable when the defect is below 1."""
    report = embedding_property_report(sketched_u)
    e = report["defect"]
    d = np.asarray(sketched_u).shape[1]
    applicable = e < 1.0
    report["applicable"] = applicable
    if not applicable:
        report["all_hold"] = False
        return report
    sqrt_bound = e / math.sqrt(1.0 - e)
    ratio_bound = e / (1.0 - e)
    checks = {
        "part1_sv_deviation": report["sv_deviation"] <= e + slack,
        "part1_full_rank": report["rank"] == d,
        "part2_sigma_minus_inverse": report["sigma_minus_inverse"] <= sqrt_bound + slack,
        "part2_one_minus_inv_sq": report["one_minus_inv_sq"] <= ratio_bound + slack,
        "part3_pinv_minus_transpose": report["pinv_minus_transpose"] <= sqrt_bound + slack,
        "part5_pinv_gram_deviation": report["pinv_gram_deviation"] <= ratio_bound + slack,
    }
    report["checks"] = checks
    report["all_hold"] = all(checks.values())
    return report


def pinv_factorization_residual(
    sketched_x: np.ndarray, sketched_u: np.ndarray, sigma: np.ndarray, V: np.ndarray
) -> float:
    """Residual of pinv(Pi X) = V diag(1/sigma) pinv(Pi U) (spectral norm)."""
    lhs = np.linalg.pinv(np.asarray(sketched_x, dtype=float))
    rhs = (V / sigma) @ np.linalg.pinv(np.asarray(sketched_u, dtype=float))
    return float(np.linalg.norm(lhs - rhs, ord=2))


@dataclass(frozen=True)
class Preconditioner:
    """Triangular-times-permutation factor R = T P from pivoted QR.

    ``piv`` is the column permutation reported by the factorization:
    sketch[:, piv] = Q T.  Applying R^{-1} = P^T T^{-1} costs O(d^2)
    via one triangular solve plus an index shuffle.
    """

    T: np.ndarray
    piv: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        piv = np.asarray(self.piv, dtype=np.intp)
        d = T.shape[0]
        if T.shape != (d, d) or piv.shape != (d,):
            raise ValueError("inconsistent factor shapes")
        diag = np.abs(np.diag(T))
        if diag.min() < 1e-12 * np.abs(T).max():
            raise SketchRankDeficient(
                f"triangular factor numerically singular "
                f"(min |T_ii| = {diag.min():.3e})"
            )
        Tc = T.copy()
        Tc.setflags(write=False)
        pc = piv.copy()
        pc.setflags(write=False)
        object.__setattr__(self, "T", Tc)
        object.__setattr__(self, "piv", pc)

    @property
    def d(self) -> int:
        return self.T.shape[0]

    def permutation_matrix(self) -> np.ndarray:
        P = np.zeros((self.d, self.d))
        P[np.arange(self.d), self.piv] = 1.0
        return P

    def r_matrix(self) -> np.ndarray:
        """Dense R = T P (for inspection; solves never form it)."""
        inv_piv = np.argsort(self.piv)
        return self.T[:, inv_piv]

    def apply_inverse(self, b: np.ndarray) -> np.ndarray:
        """R^{-1} b = P^T T^{-1} b."""
        z = scipy.linalg.solve_triangular(self.T, np.asarray(b, dtype=float))
        out = np.empty_like(z)
        out[self.piv] = z
        return out

    def apply_inverse_transpose(self, b: np.ndarray) -> np.ndarray:
        """R^{-T} b = T^{-T} P b."""
        b = np.asarray(b, dtype=float)
        return scipy.linalg.solve_triangular(self.T, b[self.piv], trans="T")

    def x_times_inverse(self, X: np.ndarray) -> np.ndarray:
        """X R^{-1} through one multi-RHS triangular solve."""
        X = np.asarray(X, dtype=float)
        return scipy.linalg.solve_triangular(self.T, X[:, self.piv].T, trans="T").T


def build_preconditioner(X: np.ndarray, op: SketchOperator) -> Preconditioner:
    """Pivoted QR of the sketched matrix; requires op output >= d rows."""
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    if op.r < d:
        raise SketchRankDeficient(
            f"sketch dimension r={op.r} is below the column count d={d}"
        )
    sketched = apply_sketch(op, X)
    _, T, piv = scipy.linalg.qr(sketched, mode="economic", pivoting=True)
    return Preconditioner(T=T, piv=piv)


@dataclass(frozen=True)
class ApproxLeverage:
    """Constant-relative-error leverage estimates."""

    ell_hat: np.ndarray

    def __post_init__(self):
        ell_hat = np.asarray(self.ell_hat, dtype=float)
        if np.any(ell_hat <= 0.0) or not np.all(np.isfinite(ell_hat)):
            raise ValueError("approximate leverage scores must be positive")
        ell_hat = ell_hat.copy()
        ell_hat.setflags(write=False)
        object.__setattr__(self, "ell_hat", ell_hat)


def approx_leverage(
    X: np.ndarray, precond: Preconditioner, op2: SketchOperator
) -> ApproxLeverage:
    """Squared row norms of (X R^{-1}) Pi2.

    The preconditioned rows are produced by triangular solves (R^{-1} is
    never formed densely); ``op2`` must accept d-dimensional input and
    compresses the row space.  With identity sketches on both sides the
    estimates equal the exact leverage scores.
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    if op2.n_in != d:
        raise DimensionMismatch(
            f"row-space sketch expects input dimension {op2.n_in}, data has d={d}"
        )
    Z = precond.x_times_inverse(X)          # (n, d)
    sketched = apply_sketch(op2, Z.T)       # (r2, n)
    return ApproxLeverage(ell_hat=np.einsum("ij,ij->j", sketched, sketched))
