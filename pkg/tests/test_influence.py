import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
import scipy.stats

from cullsq import (
    Dataset,
    DegenerateDistribution,
    InvalidK,
    LeverageProfile,
    NonpositiveWeight,
    RowSubset,
    TooLarge,
    TrialBudgetExceeded,
    RngStream,
    default_max_trials,
    enumerate_subset_distribution,
    estimate_acceptance,
    leverage_scores,
    partial_projection_norm,
    rejection_sample_many,
    rejection_sample_subset,
    sample_sum_over_rows,
    sample_sum_over_rows_many,
    single_row_influences,
    subset_influence,
    thin_svd,
)
from cullsq.sketching import hadamard_columns
from _helpers import random_orthonormal


def uniform_profile(n, d):
    return LeverageProfile.from_scores(np.full(n, d / n))


class TestSingleRowInfluences:
    def test_uniform_leverage_gives_uniform_probs(self):
        p = single_row_influences(uniform_profile(10, 2))
        np.testing.assert_allclose(p, np.full(10, 0.1), atol=1e-14)
        assert abs(p.sum() - 1.0) <= 1e-12

    def test_uniform_normalizer_value(self):
        # n=10, d=2: z1 = n (1 - d/n)^2 / (d/n) = 32
        prof = uniform_profile(10, 2)
        assert abs(prof.z1 - 32.0) <= 1e-12

    def test_exact_rational_example(self):
        ell = [Fraction(9, 10), Fraction(6, 10), Fraction(3, 10), Fraction(2, 10)]
        weights = [(1 - l) ** 2 / l for l in ell]
        z = sum(weights)
        assert z == Fraction(46, 9)
        expect = [w / z for w in weights]
        assert weights == [
            Fraction(1, 90), Fraction(4, 15), Fraction(49, 30), Fraction(16, 5)
        ]
        prof = LeverageProfile.from_scores(np.array([0.9, 0.6, 0.3, 0.2]))
        p = single_row_influences(prof)
        np.testing.assert_allclose(p, [float(e) for e in expect], rtol=1e-12)

    def test_leverage_one_row_never_rejected(self):
        prof = LeverageProfile.from_scores(np.array([1.0, 0.5, 0.25, 0.25]))
        p = single_row_influences(prof)
        assert p[0] == 0.0
        assert abs(p.sum() - 1.0) <= 1e-12

    def test_all_leverage_one_degenerate(self):
        prof = LeverageProfile.from_scores(np.ones(4))
        with pytest.raises(DegenerateDistribution):
            single_row_influences(prof)


class TestSampleSumOverRows:
    def test_constant_weights_uniform_over_subsets(self):
        draws = sample_sum_over_rows_many(np.ones(5), 2, 100_000, RngStream(1))
        keys = draws @ np.array([5, 1])
        _, counts = np.unique(keys, return_counts=True)
        freqs = counts / 100_000
        assert len(freqs) == 10
        assert np.all(np.abs(freqs - 0.1) <= 0.01)

    def test_sequential_sampler_uniform(self):
        gen = RngStream(2).generator()
        counts = {}
        for _ in range(20_000):
            sub = sample_sum_over_rows(np.ones(5), 2, gen)
            counts[sub.indices] = counts.get(sub.indices, 0) + 1
        freqs = np.array(list(counts.values())) / 20_000
        assert len(counts) == 10
        assert np.all(np.abs(freqs - 0.1) <= 0.02)

    def test_closed_form_pair_probability(self):
        # f = 1..6: P[{4,5}] = (5+6) / (C(5,1) * 21) = 11/105
        f = np.arange(1.0, 7.0)
        draws = sample_sum_over_rows_many(f, 2, 200_000, RngStream(3))
        hits = np.mean((draws[:, 0] == 4) & (draws[:, 1] == 5))
        assert abs(hits - 11.0 / 105.0) <= 0.005

    @pytest.mark.parametrize("n", range(2, 9))
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_exact_distribution_chi_square(self, n, k):
        if k > n:
            pytest.skip("k > n")
        gen = np.random.default_rng(100 + 10 * n + k)
        f = gen.uniform(0.2, 3.0, size=n)
        subsets = list(combinations(range(n), k))
        weights = np.array([f[list(s)].sum() for s in subsets])
        probs = weights / (math.comb(n - 1, k - 1) * f.sum())
        np.testing.assert_allclose(probs.sum(), 1.0, atol=1e-12)
        draws = sample_sum_over_rows_many(f, k, 200_000, RngStream(10 * n + k))
        encode = n ** np.arange(k - 1, -1, -1)
        keys = draws @ encode
        table = {sum(v * e for v, e in zip(s, encode)): i for i, s in enumerate(subsets)}
        counts = np.zeros(len(subsets))
        uniq, cnt = np.unique(keys, return_counts=True)
        for u, c in zip(uniq, cnt):
            counts[table[int(u)]] = c
        if len(subsets) == 1:  # k == n: the draw is deterministic
            assert counts[0] == 200_000
            return
        result = scipy.stats.chisquare(counts, probs * 200_000)
        assert result.pvalue > 1e-4

    def test_sequential_and_batched_agree_in_distribution(self):
        f = np.array([1.0, 3.0, 0.5, 2.0, 1.5])
        gen = RngStream(4).generator()
        seq = np.array(
            [sample_sum_over_rows(f, 2, gen).indices for _ in range(20_000)]
        )
        bat = sample_sum_over_rows_many(f, 2, 20_000, RngStream(5))
        for draws in (seq, bat):
            keys, counts = np.unique(draws @ np.array([5, 1]), return_counts=True)
            assert len(keys) == 10
        seq_freq = np.bincount(seq @ np.array([5, 1]), minlength=25) / len(seq)
        bat_freq = np.bincount(bat @ np.array([5, 1]), minlength=25) / len(bat)
        assert np.max(np.abs(seq_freq - bat_freq)) <= 0.02

    def test_invalid_k(self):
        with pytest.raises(InvalidK):
            sample_sum_over_rows(np.ones(4), 0, RngStream(0))
        with pytest.raises(InvalidK):
            sample_sum_over_rows(np.ones(4), 5, RngStream(0))

    def test_nonpositive_weights(self):
        with pytest.raises(NonpositiveWeight):
            sample_sum_over_rows(np.array([1.0, 0.0, 2.0]), 1, RngStream(0))
        with pytest.raises(NonpositiveWeight):
            sample_sum_over_rows(np.array([1.0, -1.0]), 1, RngStream(0))


class TestSubsetInfluence:
    def test_single_row_closed_form(self):
        # exact-arithmetic check at leverage 1/2: theta = (1 - 1/2)^2 / d = 1/8
        X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        info = subset_influence(svd, prof, RowSubset.of([2]))
        oracle = (Fraction(1, 2)) ** 2 / Fraction(1, 2)  # weight = (1-l)^2/l
        assert abs(info.weight - float(oracle)) <= 1e-14
        assert abs(info.theta - float(Fraction(1, 8))) <= 1e-14

    def test_single_row_random_designs(self):
        gen = np.random.default_rng(6)
        X = gen.standard_normal((12, 3))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        for i in range(12):
            info = subset_influence(svd, prof, RowSubset.of([i]))
            ell = prof.ell[i]
            np.testing.assert_allclose(info.theta, (1 - ell) ** 2 / 3.0, rtol=1e-12)
            assert info.theta <= 1.0 + 1e-10

    def test_rank_destroying_subset_gets_zero(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 2.0], [0.0, 3.0]])
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        info = subset_influence(svd, prof, RowSubset.of([0]))
        assert info.weight == 0.0
        assert info.theta == 0.0

    def test_theta_at_most_one_exhaustive(self):
        gen = np.random.default_rng(7)
        U = random_orthonormal(10, 2, gen)
        svd = thin_svd(Dataset(X=U))
        prof = leverage_scores(svd)
        thetas = [
            subset_influence(svd, prof, RowSubset.of(c)).theta
            for c in combinations(range(10), 2)
        ]
        assert len(thetas) == 45
        assert max(thetas) <= 1.0 + 1e-10


class TestRejectionSampler:
    def test_matches_enumeration(self):
        gen = np.random.default_rng(8)
        X = gen.standard_normal((10, 2))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        dist = enumerate_subset_distribution(svd, prof, 2)
        draws, stats = rejection_sample_many(svd, prof, 2, 20_000, RngStream(9))
        keys = {s.indices: p for s, p in dist}
        counts = {}
        for row in draws:
            t = tuple(int(v) for v in row)
            counts[t] = counts.get(t, 0) + 1
        tv = 0.5 * sum(
            abs(counts.get(t, 0) / 20_000 - p) for t, p in keys.items()
        )
        assert tv < 0.03
        assert stats.accepted >= 20_000

    def test_matches_enumeration_larger_subsets(self):
        # 220 cells: at 1e5 draws a perfect sampler sits near TV 0.02,
        # so the threshold here is ~1.5x that expectation
        gen = np.random.default_rng(30)
        X = gen.standard_normal((12, 3))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        dist = enumerate_subset_distribution(svd, prof, 3)
        draws, _ = rejection_sample_many(svd, prof, 3, 100_000, RngStream(31))
        probs = {s.indices: p for s, p in dist}
        counts = {}
        for row in draws:
            t = tuple(int(v) for v in row)
            counts[t] = counts.get(t, 0) + 1
        tv = 0.5 * sum(
            abs(counts.get(t, 0) / 100_000 - p) for t, p in probs.items()
        )
        assert tv < 0.03

    def test_k1_reduces_to_single_row_distribution(self):
        gen = np.random.default_rng(10)
        X = gen.standard_normal((12, 2))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        p = single_row_influences(prof)
        draws, _ = rejection_sample_many(svd, prof, 1, 100_000, RngStream(11))
        freq = np.bincount(draws[:, 0], minlength=12) / 100_000
        tv = 0.5 * np.abs(freq - p).sum()
        assert tv < 0.01

    def test_sequential_draw_and_trial_count(self):
        gen = np.random.default_rng(12)
        X = gen.standard_normal((15, 3))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        subset, trials = rejection_sample_subset(svd, prof, 3, RngStream(13))
        assert subset.k == 3
        assert 1 <= trials <= default_max_trials(prof, 3)
        # same stream, same draw
        again, trials2 = rejection_sample_subset(svd, prof, 3, RngStream(13))
        assert again.indices == subset.indices and trials2 == trials

    def test_mean_trials_within_coherence_budget(self):
        # uniform-leverage design: expected trials <= n*mu/k^2, margin 2
        X = hadamard_columns(64, 2)
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        gen = RngStream(14).generator()
        trials = [rejection_sample_subset(svd, prof, 2, gen)[1] for _ in range(200)]
        budget = 2.0 * 64 * prof.coherence_mu / 4.0
        assert np.mean(trials) <= budget

    def test_never_returns_rank_destroying_subset(self):
        X = np.concatenate(
            [np.array([[1.0, 0.0]]), np.column_stack([np.zeros(9), np.arange(1.0, 10.0)])]
        )
        data = Dataset(X=X)
        svd = thin_svd(data)
        prof = leverage_scores(svd)
        assert prof.ell[0] >= 1.0 - 1e-10
        draws, _ = rejection_sample_many(svd, prof, 2, 2000, RngStream(15))
        assert not np.any(draws == 0)

    def test_trial_budget_exceeded(self):
        gen = np.random.default_rng(16)
        X = gen.standard_normal((10, 2))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        # seed picked so the single allowed proposal is rejected
        with pytest.raises(TrialBudgetExceeded) as info:
            rejection_sample_subset(svd, prof, 2, RngStream(2), max_trials=1)
        err = info.value
        assert err.trials == 1
        assert err.empirical_rate == 0.0
        assert err.acceptance_bound > 0.0

    def test_invalid_k_rejected(self):
        gen = np.random.default_rng(17)
        X = gen.standard_normal((6, 2))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        with pytest.raises(InvalidK):
            rejection_sample_subset(svd, prof, 6, RngStream(0))

    def test_batched_draws_reproducible(self):
        gen = np.random.default_rng(18)
        X = gen.standard_normal((12, 3))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        a, sa = rejection_sample_many(svd, prof, 2, 500, RngStream(19))
        b, sb = rejection_sample_many(svd, prof, 2, 500, RngStream(19))
        assert np.array_equal(a, b) and sa == sb


class TestEnumeration:
    def test_uniform_k1(self):
        X = hadamard_columns(4, 2)
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        dist = enumerate_subset_distribution(svd, prof, 1)
        np.testing.assert_allclose([p for _, p in dist], 0.25 * np.ones(4), atol=1e-12)

    def test_all_rows_subset_degenerate(self):
        X = hadamard_columns(4, 2)
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        with pytest.raises(DegenerateDistribution):
            enumerate_subset_distribution(svd, prof, 4)

    def test_lexicographic_order_and_normalization(self):
        gen = np.random.default_rng(20)
        X = gen.standard_normal((8, 2))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        dist = enumerate_subset_distribution(svd, prof, 2)
        subsets = [s.indices for s, _ in dist]
        assert subsets == sorted(subsets)
        assert abs(sum(p for _, p in dist) - 1.0) <= 1e-10

    def test_normalizer_lower_bound(self):
        # sum of weights >= C(n,k) (1-Qbar)^2 / Qbar with Qbar the mean norm
        gen = np.random.default_rng(21)
        X = gen.standard_normal((10, 2))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        subsets = list(combinations(range(10), 2))
        specs = np.array(
            [partial_projection_norm(svd, RowSubset.of(c)) for c in subsets]
        )
        weights = (1.0 - specs) ** 2 / specs
        qbar = specs.mean()
        assert weights.sum() >= len(subsets) * (1 - qbar) ** 2 / qbar - 1e-8

    def test_too_large_guard(self):
        gen = np.random.default_rng(22)
        X = gen.standard_normal((30, 2))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        with pytest.raises(TooLarge):
            enumerate_subset_distribution(svd, prof, 10)


class TestAcceptanceBound:
    def test_uniform_leverage_value(self):
        # mu = n/d = 32, bound = k^2/(n mu) = 4/2048 = 1/512
        prof = uniform_profile(64, 2)
        bound = estimate_acceptance(prof, 2)
        np.testing.assert_allclose(bound.lower_bound, 1.0 / 512.0, rtol=1e-12)
        np.testing.assert_allclose(bound.lower_bound, 2 * 4 / 64**2, rtol=1e-12)
        assert bound.precondition_met  # 64 >= 8*2*2

    def test_precondition_flag_below_threshold(self):
        prof = uniform_profile(15, 1)
        bound = estimate_acceptance(prof, 2)
        assert not bound.precondition_met  # 15 < 8*1*2 = 16
        np.testing.assert_allclose(bound.lower_bound, 4.0 / (15.0 * 15.0), rtol=1e-12)

    def test_empirical_rate_beats_bound(self):
        gen = np.random.default_rng(23)
        X = gen.standard_normal((32, 2))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        bound = estimate_acceptance(prof, 2)
        assert bound.precondition_met
        _, stats = rejection_sample_many(svd, prof, 2, 3000, RngStream(24))
        se = math.sqrt(stats.acceptance_rate * (1 - stats.acceptance_rate) / stats.proposals)
        assert stats.acceptance_rate >= bound.lower_bound - 3 * se


class TestCrossValidation:
    def test_rejection_sampler_chi_square_against_enumeration(self):
        gen = np.random.default_rng(50)
        X = gen.standard_normal((9, 2))
        svd = thin_svd(Dataset(X=X))
        prof = leverage_scores(svd)
        dist = enumerate_subset_distribution(svd, prof, 2)
        probs = np.array([p for _, p in dist])
        idx_of = {s.indices: i for i, (s, _) in enumerate(dist)}
        draws, _ = rejection_sample_many(svd, prof, 2, 200_000, RngStream(51))
        counts = np.zeros(len(dist))
        for row in draws:
            counts[idx_of[tuple(int(v) for v in row)]] += 1
        res = scipy.stats.chisquare(counts, probs * 200_000)
        assert res.pvalue > 1e-4

    def test_single_row_expectation_identity(self):
        # E[error after rejecting one row] equals (1 + 1/Z) times the
        # optimum exactly, whenever no row has leverage pinned at 1
        from cullsq import Dataset, full_solve, leave_A_out_error

        gen = np.random.default_rng(52)
        X = gen.standard_normal((60, 4))
        y = X @ gen.standard_normal(4) + gen.standard_normal(60)
        data = Dataset(X=X, y=y)
        svd = thin_svd(data)
        prof = leverage_scores(svd)
        w_star, opt = full_solve(data, svd)
        p = single_row_influences(prof)
        errs = np.array(
            [
                leave_A_out_error(data, RowSubset.of([i]), svd, full=(w_star, opt))
                for i in range(60)
            ]
        )
        ratio = float(p @ errs) / opt
        assert abs(ratio - (1.0 + 1.0 / prof.z1)) <= 1e-12

    def test_monte_carlo_mean_matches_enumerated_expectation(self):
        from cullsq import Dataset, full_solve, leave_A_out_error

        gen = np.random.default_rng(53)
        X = gen.standard_normal((12, 2))
        y = X @ gen.standard_normal(2) + gen.standard_normal(12)
        data = Dataset(X=X, y=y)
        svd = thin_svd(data)
        prof = leverage_scores(svd)
        w_star, opt = full_solve(data, svd)
        dist = enumerate_subset_distribution(svd, prof, 2)
        exact = sum(
            pr * leave_A_out_error(data, s, svd, full=(w_star, opt))
            for s, pr in dist
            if pr > 0
        )
        draws, _ = rejection_sample_many(svd, prof, 2, 5000, RngStream(54))
        errs = np.array(
            [
                leave_A_out_error(data, RowSubset.of(r), svd, full=(w_star, opt))
                for r in draws
            ]
        )
        sem = errs.std(ddof=1) / math.sqrt(len(errs))
        assert abs(errs.mean() - exact) <= 4.0 * sem


class TestSpectralNormAverages:
    @pytest.mark.parametrize("n,d,k", [(8, 2, 2), (12, 3, 3), (10, 2, 1), (12, 2, 2)])
    def test_mean_projection_norm_band(self, n, d, k):
        # k/n <= mean ||P_A||_2 <= dk/n for orthonormal U
        gen = np.random.default_rng(1000 + n + d + k)
        U = random_orthonormal(n, d, gen)
        svd = thin_svd(Dataset(X=U))
        specs = [
            partial_projection_norm(svd, RowSubset.of(c))
            for c in combinations(range(n), k)
        ]
        qbar = float(np.mean(specs))
        assert k / n - 1e-10 <= qbar <= d * k / n + 1e-10

    def test_inverse_frobenius_sum_bound(self):
        # d=1, k=2, n=16: sum over pairs of 1/(ell_i + ell_j) >= 2 C(16,2)
        gen = np.random.default_rng(25)
        x = gen.standard_normal(16)
        ell = x**2 / (x @ x)
        total = sum(
            1.0 / (ell[i] + ell[j]) for i, j in combinations(range(16), 2)
        )
        assert total >= 2 * math.comb(16, 2)
