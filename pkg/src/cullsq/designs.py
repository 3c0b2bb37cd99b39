"""Synthetic design matrices and label generators for experiments.

Three design families cover the leverage-profile extremes: i.i.d.
gaussian (mildly non-uniform leverage), hadamard-uniform (exactly
uniform leverage d/n), and coherent (a fraction of rows inflated by 1e3
so leverage concentrates on them and the coherence mu blows up).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidConfig
from .regression import Dataset
from .rng import as_generator
from .sketching import hadamard_columns

SPIKE_SCALE = 1e3

GAUSSIAN = "gaussian"
HADAMARD_UNIFORM = "hadamard-uniform"
COHERENT = "coherent"

DESIGN_KINDS = (GAUSSIAN, HADAMARD_UNIFORM, COHERENT)


def gaussian_design(n: int, d: int, rng) -> np.ndarray:
    gen = as_generator(rng)
    return gen.standard_normal((n, d))


def hadamard_uniform_design(n: int, d: int) -> np.ndarray:
    """First d columns of the normalized Hadamard matrix; every row has
    squared norm d/n, so leverage scores are exactly uniform."""
    if n & (n - 1):
        raise InvalidConfig(f"hadamard-uniform design needs n a power of two, got {n}")
    return hadamard_columns(n, d)


def coherent_design(n: int, d: int, spike_fraction: float, rng) -> np.ndarray:
    """Gaussian design with the first ceil(spike_fraction * n) rows
    scaled by 1e3 to concentrate leverage on them."""
    if not (0.0 < spike_fraction < 1.0):
        raise InvalidConfig(f"spike fraction must be in (0, 1), got {spike_fraction}")
    gen = as_generator(rng)
    X = gen.standard_normal((n, d))
    m = max(1, int(round(spike_fraction * n)))
    X[:m] *= SPIKE_SCALE
    return X


def conditioned_design(n: int, d: int, kappa: float, rng) -> np.ndarray:
    """Design with prescribed condition number: random orthonormal
    factors around geometrically spaced singular values 1 .. 1/kappa."""
    if kappa < 1.0:
        raise InvalidConfig("condition number must be >= 1")
    gen = as_generator(rng)
    U, _ = np.linalg.qr(gen.standard_normal((n, d)))
    V, _ = np.linalg.qr(gen.standard_normal((d, d)))
    sigma = np.geomspace(1.0, 1.0 / kappa, d)
    return (U * sigma) @ V.T


def make_design(kind: str, n: int, d: int, rng, spike_fraction: float = 0.1) -> np.ndarray:
    if kind == GAUSSIAN:
        return gaussian_design(n, d, rng)
    if kind == HADAMARD_UNIFORM:
        return hadamard_uniform_design(n, d)
    if kind == COHERENT:
        return coherent_design(n, d, spike_fraction, rng)
    raise InvalidConfig(f"unknown design kind {kind!r}")


def make_dataset(
    kind: str,
    n: int,
    d: int,
    noise: float,
    rng,
    spike_fraction: float = 0.1,
) -> Dataset:
    """Design plus labels y = X w0 + noise * g with gaussian w0 and g.

    noise = 0 gives a consistent system.  Draw order (design entries,
    then w0, then g) is fixed so a seed pins the dataset exactly.
    """
    gen = as_generator(rng)
    X = make_design(kind, n, d, gen, spike_fraction=spike_fraction)
    w0 = gen.standard_normal(d)
    y = X @ w0
    if noise != 0.0:
        y = y + noise * gen.standard_normal(n)
    return Dataset(X=X, y=y)
