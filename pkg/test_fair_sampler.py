"""FairScoresSampler のテスト"""
import numpy as np
import pytest

from faircss.baselines import single_group_sample
from faircss.errors import InfeasibleError, PreconditionError
from faircss.fair_sampler import (
    THRESHOLD_SLACK,
    SamplerConfig,
    cardinality_bound,
    cardinality_certificate,
    fair_scores_sample,
    preset_theta,
)
from faircss.leverage import LeveragePairs, leverage_scores
from faircss.oracle import brute_force_min_fairness_scores

THREE_PAIRS = LeveragePairs(alphas=[0.9, 0.1, 0.5], betas=[0.1, 0.9, 0.5])


def _random_pairs(rng, n, k):
    a = rng.standard_normal((int(rng.integers(n, n + 6)), n))
    b = rng.standard_normal((int(rng.integers(n, n + 6)), n))
    return LeveragePairs(alphas=leverage_scores(a, k), betas=leverage_scores(b, k), k=k)


class TestFairScoresSample:
    def test_three_pair_example(self):
        columns, trace = fair_scores_sample(THREE_PAIRS, SamplerConfig.equal(0.9))
        assert columns == (0, 1)
        assert trace.phase_one_picks == (0,)
        assert trace.satisfied_first == "A"
        assert trace.phase_two_picks == (1,)

    def test_dominant_pair_singleton(self):
        pairs = LeveragePairs(alphas=[0.95, 0.05, 0.0], betas=[0.95, 0.0, 0.05])
        columns, _ = fair_scores_sample(pairs, SamplerConfig.equal(0.9))
        assert columns == (0,)

    def test_identical_groups_match_single_group(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(3, 12))
            k = int(rng.integers(1, n))
            scores = leverage_scores(rng.standard_normal((n + 3, n)), k)
            theta = float(rng.uniform(0.2, 0.99)) * k
            columns, trace = fair_scores_sample(LeveragePairs(scores, scores, k=k), SamplerConfig.equal(theta))
            assert columns == single_group_sample(scores, theta)
            assert trace.phase_two_picks == ()

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            fair_scores_sample(THREE_PAIRS, SamplerConfig(theta_a=1.4, theta_b=1.6))

    def test_theta_must_be_below_k(self):
        pairs = LeveragePairs(alphas=[1.0, 0.0], betas=[0.0, 1.0], k=1)
        with pytest.raises(PreconditionError):
            fair_scores_sample(pairs, SamplerConfig.equal(1.0))

    def test_trace_rows_cover_selection(self):
        columns, trace = fair_scores_sample(THREE_PAIRS, SamplerConfig.equal(0.9))
        rows = trace.rows()
        assert sorted(r["index"] for r in rows) == list(columns)
        assert [r["phase"] for r in rows] == [1, 2]

    def test_feasibility_and_phase_one_order(self):
        rng = np.random.default_rng(31)
        for _ in range(300):
            n = int(rng.integers(3, 15))
            k = int(rng.integers(1, n))
            pairs = _random_pairs(rng, n, k)
            config = SamplerConfig(theta_a=float(rng.uniform(0.1, 1.0)) * k * 0.999,
                                   theta_b=float(rng.uniform(0.1, 1.0)) * k * 0.999)
            columns, trace = fair_scores_sample(pairs, config)
            idx = list(columns)
            assert pairs.alphas[idx].sum() >= config.theta_a - THRESHOLD_SLACK
            assert pairs.betas[idx].sum() >= config.theta_b - THRESHOLD_SLACK
            sums = pairs.alphas + pairs.betas
            picked = list(trace.phase_one_picks)
            for step, j in enumerate(picked):
                rest = [i for i in range(n) if i not in picked[:step]]
                assert sums[j] == max(sums[i] for i in rest)
            assert not set(trace.phase_one_picks) & set(trace.phase_two_picks)
            assert fair_scores_sample(pairs, config) == (columns, trace)


class TestCardinality:
    def test_three_pair_certificate(self):
        config = SamplerConfig.equal(0.9)
        columns, _ = fair_scores_sample(THREE_PAIRS, config)
        oracle = brute_force_min_fairness_scores(THREE_PAIRS, 0.9, 0.9)
        report = cardinality_certificate(THREE_PAIRS, config, columns, oracle.size)
        assert oracle.size == 2
        assert report.bound == 4
        assert report.passed

    def test_random_battery(self):
        rng = np.random.default_rng(500)
        for _ in range(500):
            n = int(rng.integers(3, 15))
            k = int(rng.integers(1, n))
            pairs = _random_pairs(rng, n, k)
            config = SamplerConfig.equal(float(rng.uniform(0.2, 0.999)) * k)
            columns, _ = fair_scores_sample(pairs, config)
            oracle = brute_force_min_fairness_scores(pairs, config.theta_a, config.theta_b)
            assert len(columns) >= oracle.size
            report = cardinality_certificate(pairs, config, columns, oracle.size)
            assert report.passed, (pairs, config, columns, oracle)

    def test_requires_equal_thresholds(self):
        with pytest.raises(PreconditionError):
            cardinality_certificate(THREE_PAIRS, SamplerConfig(0.9, 0.8), (0, 1), 2)

    def test_bound_values(self):
        assert cardinality_bound(1) == 3
        assert cardinality_bound(2) == 4
        assert cardinality_bound(3) == 6


def test_presets():
    assert preset_theta("k-minus-half", 10) == 9.5
    assert preset_theta("3k/4", 8) == 6.0
    assert SamplerConfig.from_preset("k-1/2", 4) == SamplerConfig.equal(3.5)
    with pytest.raises(PreconditionError):
        preset_theta("half", 4)
