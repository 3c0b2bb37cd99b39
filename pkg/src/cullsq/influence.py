"""Joint influence distribution over row subsets, with exact samplers.

The influence of a k-subset A of rows is proportional to
(1 - s_A)^2 / s_A where s_A = ||U_A U_A^T||_2 is the spectral norm of
the subset's partial projection.  Subsets whose removal would destroy
full rank (s_A within 1e-10 of 1) get weight zero.

Sampling uses rejection: propose from the sum-over-rows distribution
q_A proportional to sum_{i in A} 1/ell_i (exactly realizable by drawing
one row from the normalized weights and the rest uniformly), then accept
with ratio

    theta_A = [(1 - s_A)^2 / s_A] / [(d / k^2) * sum_{i in A} 1/ell_i],

which is always at most 1, so accepted subsets are distributed exactly
according to the influence probabilities.  The acceptance probability is
at least k^2 / (n * mu) with mu the mean inverse leverage, provided
n >= 8 d k.

A full-enumeration routine doubles as the validation oracle at small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice
from typing import List, NamedTuple, Tuple

import numpy as np

from .errors import (
    DegenerateDistribution,
    InvalidK,
    NonpositiveWeight,
    TooLarge,
    TrialBudgetExceeded,
)
from .regression import (
    SPEC_SINGULAR_TOL,
    LeverageProfile,
    RowSubset,
    ThinSvd,
    partial_projection_norm,
)
from .rng import as_generator

ENUMERATION_LIMIT = 2_000_000
DEFAULT_BATCH = 4096


def single_row_influences(profile: LeverageProfile) -> np.ndarray:
    """Probability of rejecting each single row, proportional to
    (1 - ell)^2 / ell.  Rows with leverage within 1e-10 of 1 can never
    be rejected and get probability exactly 0.
    """
    ell = profile.ell
    weights = np.where(
        ell >= 1.0 - SPEC_SINGULAR_TOL, 0.0, (1.0 - ell) ** 2 / ell
    )
    total = weights.sum()
    if total <= 0.0:
        raise DegenerateDistribution("all rows have leverage 1; nothing can be rejected")
    return weights / total


def _check_weights(f_values: np.ndarray) -> np.ndarray:
    f = np.asarray(f_values, dtype=float)
    if f.ndim != 1:
        raise NonpositiveWeight("weights must be a 1-D array")
    if not np.all(np.isfinite(f)) or np.any(f <= 0.0):
        raise NonpositiveWeight("weights must be finite and strictly positive")
    return f


def _inverse_cdf_draw(gen, cumulative: np.ndarray, size=None):
    """Index draws by binary search on a precomputed cumulative array."""
    u = gen.random(size) * cumulative[-1]
    idx = np.searchsorted(cumulative, u, side="right")
    return np.minimum(idx, len(cumulative) - 1)


def sample_sum_over_rows(f_values, k: int, rng) -> RowSubset:
    """Draw a k-subset with probability proportional to its weight sum.

    One row is drawn by inverse CDF over the weights, the remaining k-1
    by a partial Fisher-Yates shuffle of the other n-1 indices, giving
    subset probability sum_{i in A} f_i / (C(n-1, k-1) * sum_j f_j).
    """
    f = _check_weights(f_values)
    n = f.shape[0]
    if not (1 <= k <= n):
        raise InvalidK(f"k={k} out of range for n={n}")
    gen = as_generator(rng)
    cumulative = np.cumsum(f)
    first = int(_inverse_cdf_draw(gen, cumulative))
    if k == 1:
        return RowSubset.of([first])
    pool = np.concatenate([np.arange(first), np.arange(first + 1, n)])
    m = n - 1
    for i in range(k - 1):
        j = i + int(gen.integers(0, m - i))
        pool[i], pool[j] = pool[j], pool[i]
    return RowSubset.of(np.concatenate([[first], pool[: k - 1]]))


def sample_sum_over_rows_many(f_values, k: int, count: int, rng) -> np.ndarray:
    """Vectorized version of :func:`sample_sum_over_rows`.

    Returns a (count, k) array of sorted index rows with the same
    distribution (the k-1 uniform companions are realized as the k-1
    smallest of n-1 i.i.d. random keys).
    """
    f = _check_weights(f_values)
    n = f.shape[0]
    if not (1 <= k <= n):
        raise InvalidK(f"k={k} out of range for n={n}")
    gen = as_generator(rng)
    cumulative = np.cumsum(f)
    return _propose_batch(gen, cumulative, n, k, count)


def _propose_batch(gen, cumulative, n, k, batch) -> np.ndarray:
    first = _inverse_cdf_draw(gen, cumulative, batch)
    if k == 1:
        return first[:, None].astype(np.intp)
    keys = gen.random((batch, n))
    keys[np.arange(batch), first] = np.inf
    rest = np.argpartition(keys, k - 1, axis=1)[:, : k - 1]
    subsets = np.concatenate([first[:, None], rest], axis=1).astype(np.intp)
    subsets.sort(axis=1)
    return subsets


def _batch_spec_norms(U: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    """Spectral norm of U_A U_A^T for each row of ``subsets``."""
    d = U.shape[1]
    k = subsets.shape[1]
    UA = U[subsets]  # (B, k, d)
    if k <= d:
        gram = UA @ np.swapaxes(UA, 1, 2)
    else:
        gram = np.swapaxes(UA, 1, 2) @ UA
    top = np.linalg.eigvalsh(gram)[..., -1]
    return np.clip(top, 0.0, 1.0)


def _influence_weights(spec: np.ndarray) -> np.ndarray:
    """Unnormalized influence weight (1-s)^2/s, zero at near-singular s."""
    spec = np.asarray(spec, dtype=float)
    safe = np.clip(spec, 1e-300, None)
    weights = np.where(
        spec >= 1.0 - SPEC_SINGULAR_TOL, 0.0, (1.0 - spec) ** 2 / safe
    )
    return weights


@dataclass(frozen=True)
class SubsetInfluence:
    """Influence data for one subset: spectral norm of the partial
    projection, unnormalized influence weight, proposal weight, and the
    acceptance ratio theta (guaranteed <= 1 up to roundoff)."""

    subset: RowSubset
    spec: float
    weight: float
    q_weight: float
    theta: float


def subset_influence(
    svd: ThinSvd, profile: LeverageProfile, subset: RowSubset
) -> SubsetInfluence:
    spec = partial_projection_norm(svd, subset)
    k = subset.k
    idx = subset.array()
    q_weight = float(np.sum(1.0 / profile.ell[idx]))
    denom = (svd.d / k**2) * q_weight
    if spec >= 1.0 - SPEC_SINGULAR_TOL:
        weight = 0.0
        theta = 0.0
    else:
        # log-space evaluation keeps (1-spec)^2 accurate as spec -> 1
        log_weight = 2.0 * math.log1p(-spec) - math.log(max(spec, 1e-300))
        weight = math.exp(log_weight)
        theta = math.exp(log_weight - math.log(denom))
    return SubsetInfluence(
        subset=subset, spec=spec, weight=weight, q_weight=q_weight, theta=theta
    )


def default_max_trials(profile: LeverageProfile, k: int) -> int:
    """Proposal budget: 50x the expected trials implied by the
    k^2/(n*mu) acceptance lower bound."""
    n = profile.n
    return int(math.ceil(50.0 * n * profile.coherence_mu / k**2))


class AcceptanceBound(NamedTuple):
    """Lower bound k^2/(n*mu) on the acceptance probability.

    ``precondition_met`` flags whether n >= 8dk, the regime in which the
    bound is guaranteed; outside it the value is reported but not
    guaranteed.
    """

    lower_bound: float
    precondition_met: bool


def estimate_acceptance(profile: LeverageProfile, k: int) -> AcceptanceBound:
    n = profile.n
    d = int(round(float(np.sum(profile.ell))))
    bound = k**2 / (n * profile.coherence_mu)
    return AcceptanceBound(lower_bound=bound, precondition_met=n >= 8 * d * k)


def rejection_sample_subset(
    svd: ThinSvd,
    profile: LeverageProfile,
    k: int,
    rng,
    max_trials: int | None = None,
) -> Tuple[RowSubset, int]:
    """Draw one subset distributed exactly by the joint influence.

    Returns the subset and the number of proposals consumed, the
    accepted one included.  Raises :class:`TrialBudgetExceeded` after
    ``max_trials`` rejected proposals.
    """
    n = svd.n
    if not (1 <= k < n):
        raise InvalidK(f"k={k} out of range for n={n}")
    if max_trials is None:
        max_trials = default_max_trials(profile, k)
    if max_trials < 1:
        raise InvalidK("max_trials must be at least 1")
    gen = as_generator(rng)
    f = 1.0 / profile.ell
    for trial in range(1, max_trials + 1):
        subset = sample_sum_over_rows(f, k, gen)
        info = subset_influence(svd, profile, subset)
        if gen.random() < info.theta:
            return subset, trial
    raise TrialBudgetExceeded(
        trials=max_trials,
        accepted=0,
        acceptance_bound=estimate_acceptance(profile, k).lower_bound,
    )


class SamplerStats(NamedTuple):
    proposals: int
    accepted: int

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else 0.0


def rejection_sample_many(
    svd: ThinSvd,
    profile: LeverageProfile,
    k: int,
    count: int,
    rng,
    max_trials: int | None = None,
    batch: int = DEFAULT_BATCH,
) -> Tuple[np.ndarray, SamplerStats]:
    """Draw ``count`` independent subsets from the joint influence.

    Proposals are generated and tested in fixed-size batches, which is
    distributionally identical to the one-at-a-time sampler (accepted
    proposals of an i.i.d. proposal stream are i.i.d. draws from the
    target).  Returns a (count, k) array of sorted index rows plus
    proposal statistics covering every generated batch.
    """
    n = svd.n
    if not (1 <= k < n):
        raise InvalidK(f"k={k} out of range for n={n}")
    if count < 1:
        raise InvalidK("count must be at least 1")
    if max_trials is None:
        max_trials = default_max_trials(profile, k)
    budget = max_trials * count
    gen = as_generator(rng)
    f = 1.0 / profile.ell
    cumulative = np.cumsum(f)
    d = svd.d
    out = np.empty((count, k), dtype=np.intp)
    got = 0
    proposals = 0
    accepted_total = 0
    while got < count:
        if proposals >= budget:
            raise TrialBudgetExceeded(
                trials=proposals,
                accepted=accepted_total,
                acceptance_bound=estimate_acceptance(profile, k).lower_bound,
            )
        b = min(batch, budget - proposals)
        subs = _propose_batch(gen, cumulative, n, k, b)
        spec = _batch_spec_norms(svd.U, subs)
        weights = _influence_weights(spec)
        q_weights = f[subs].sum(axis=1)
        theta = weights * (k**2 / d) / q_weights
        accept = gen.random(b) < theta
        proposals += b
        accepted_total += int(accept.sum())
        picked = subs[accept]
        take = min(count - got, picked.shape[0])
        out[got : got + take] = picked[:take]
        got += take
    return out, SamplerStats(proposals=proposals, accepted=accepted_total)


def enumerate_subset_distribution(
    svd: ThinSvd, profile: LeverageProfile, k: int
) -> List[Tuple[RowSubset, float]]:
    """Exact influence probabilities of every k-subset, in lexicographic
    order.  Exponential in k; guarded at C(n, k) <= 2e6."""
    n = svd.n
    if not (1 <= k <= n):
        raise InvalidK(f"k={k} out of range for n={n}")
    total = math.comb(n, k)
    if total > ENUMERATION_LIMIT:
        raise TooLarge(f"C({n},{k}) = {total} exceeds {ENUMERATION_LIMIT}")
    weights = np.empty(total, dtype=float)
    subsets = np.empty((total, k), dtype=np.intp)
    it = combinations(range(n), k)
    pos = 0
    chunk = 65536
    while True:
        block = list(islice(it, chunk))
        if not block:
            break
        arr = np.array(block, dtype=np.intp)
        spec = _batch_spec_norms(svd.U, arr)
        subsets[pos : pos + len(block)] = arr
        weights[pos : pos + len(block)] = _influence_weights(spec)
        pos += len(block)
    normalizer = weights.sum()
    if normalizer <= 0.0:
        raise DegenerateDistribution(
            "every subset has spectral norm 1; influence normalizer is zero"
        )
    probs = weights / normalizer
    return [
        (RowSubset(tuple(int(i) for i in row)), float(p))
        for row, p in zip(subsets, probs)
    ]
