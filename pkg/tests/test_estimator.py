import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from aloha_noma.estimator import (
    HypothesisConfig,
    bonferroni_threshold,
    estimate_active_count,
    monte_carlo_estimation,
    p_value_from_statistic,
    prior_config_probability,
    simulate_estimation_round,
)


def config(m=50, alpha=0.05, mean_signal=5.0, noise_sigma=1.0, **kw):
    return HypothesisConfig(m, alpha, mean_signal, noise_sigma, **kw)


class TestPriorConfigProbability:
    def test_all_active_at_zero_alpha_limit(self):
        assert prior_config_probability(5, 5, 0.0) == 1.0

    def test_direct_substitution(self):
        assert prior_config_probability(2, 3, 0.5) == pytest.approx(0.125)
        assert prior_config_probability(0, 4, 0.5) == pytest.approx(0.0625)

    def test_rejects_count_above_population(self):
        with pytest.raises(ValueError):
            prior_config_probability(4, 3, 0.5)

    def test_rejects_alpha_outside_unit_interval(self):
        with pytest.raises(ValueError):
            prior_config_probability(1, 3, 1.5)
        with pytest.raises(ValueError):
            prior_config_probability(1, 3, -0.1)


class TestBonferroniThreshold:
    def test_divides_level_across_hypotheses(self):
        assert bonferroni_threshold(0.05, 10) == pytest.approx(0.005)

    def test_single_hypothesis_keeps_level(self):
        assert bonferroni_threshold(0.05, 1) == 0.05

    def test_rejects_degenerate_level(self):
        with pytest.raises(ValueError):
            bonferroni_threshold(0.0, 5)
        with pytest.raises(ValueError):
            bonferroni_threshold(1.0, 5)


class TestPValueFromStatistic:
    def test_null_median(self):
        assert p_value_from_statistic(0.0, 1.0) == 0.5

    def test_tail_limit(self):
        assert p_value_from_statistic(math.inf, 1.0) == 0.0

    def test_standard_tail_against_numeric_integration(self):
        grid = np.linspace(1.645, 40.0, 400001)
        density = np.exp(-0.5 * grid * grid) / math.sqrt(2.0 * math.pi)
        oracle = float(np.trapezoid(density, grid))
        assert p_value_from_statistic(1.645, 1.0) == pytest.approx(oracle, abs=1e-9)
        assert p_value_from_statistic(1.645, 1.0) == pytest.approx(0.05, abs=1e-3)

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            p_value_from_statistic(1.0, 0.0)

    @given(st.floats(min_value=-50.0, max_value=50.0), st.floats(min_value=-50.0, max_value=50.0))
    def test_monotone_decreasing(self, a, b):
        lo, hi = sorted((a, b))
        assert p_value_from_statistic(hi, 2.0) <= p_value_from_statistic(lo, 2.0)


class TestEstimateActiveCount:
    def test_silence_detects_nothing(self):
        outcome = estimate_active_count([0.0] * 50, config())
        assert outcome.estimated_count == 0
        assert outcome.rejected == frozenset()

    def test_noiseless_separation(self):
        for k in (1, 3, 7):
            stats = [100.0] * k + [0.0] * (50 - k)
            outcome = estimate_active_count(stats, config())
            assert outcome.estimated_count == k
            assert outcome.rejected == frozenset(range(k))

    def test_threshold_is_inclusive(self):
        # statistic 0 has p exactly 0.5; alpha/M = 0.5 must reject it
        cfg = config(m=1, alpha=0.5)
        outcome = estimate_active_count([0.0], cfg)
        assert outcome.rejected == frozenset({0})

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            estimate_active_count([0.0] * 49, config())

    @given(
        st.lists(st.floats(min_value=-10.0, max_value=10.0), min_size=5, max_size=5),
        st.integers(min_value=0, max_value=4),
        st.floats(min_value=0.1, max_value=10.0),
    )
    def test_raising_a_statistic_never_drops_the_count(self, stats, idx, bump):
        cfg = config(m=5, alpha=0.2)
        before = estimate_active_count(stats, cfg).estimated_count
        raised = list(stats)
        raised[idx] += bump
        after = estimate_active_count(raised, cfg).estimated_count
        assert after >= before


class TestSimulateEstimationRound:
    def test_deterministic_per_seed(self):
        cfg = config()
        first = simulate_estimation_round({1, 4, 9}, cfg, seed=123)
        second = simulate_estimation_round({1, 4, 9}, cfg, seed=123)
        assert first == second

    def test_overwhelming_signal_detects_everyone(self):
        cfg = config(m=20, mean_signal=10.0)
        outcome = simulate_estimation_round(range(20), cfg, seed=0)
        assert outcome.estimated_count == 20

    def test_rejects_out_of_range_index(self):
        with pytest.raises(ValueError):
            simulate_estimation_round({50}, config(), seed=0)

    def test_matches_single_trial_monte_carlo(self):
        cfg = config()
        outcome = simulate_estimation_round({2, 5}, cfg, seed=99)
        mc = monte_carlo_estimation({2, 5}, cfg, trials=1, seed=99)
        assert mc.mean_estimate == outcome.estimated_count


class TestMonteCarloEstimation:
    def test_fwer_bounded_under_all_null(self):
        cfg = config()
        trials = 100_000
        mc = monte_carlo_estimation([], cfg, trials, seed=31)
        exact = 1.0 - (1.0 - cfg.alpha / cfg.m) ** cfg.m
        sigma = math.sqrt(exact * (1.0 - exact) / trials)
        assert mc.fwer <= cfg.alpha + 3.0 * math.sqrt(cfg.alpha * (1 - cfg.alpha) / trials)
        assert mc.fwer == pytest.approx(exact, abs=4.0 * sigma)
        assert math.isnan(mc.power)

    def test_mean_estimate_matches_gaussian_tail_oracle(self):
        # ten active at E = 5 sigma among fifty: expected count is
        # 10 * P(N(5,1) above the Bonferroni z) + 40 * (alpha / M)
        cfg = config()
        threshold_z = float(sps.norm.isf(cfg.alpha / cfg.m))
        detect = float(sps.norm.sf(threshold_z - 5.0))
        oracle = 10.0 * detect + 40.0 * (cfg.alpha / cfg.m)
        trials = 20_000
        mc = monte_carlo_estimation(range(10), cfg, trials, seed=77)
        spread = math.sqrt(
            (10.0 * detect * (1 - detect) + 40.0 * 0.001 * 0.999) / trials
        )
        assert mc.mean_estimate == pytest.approx(oracle, abs=4.0 * spread)
        assert mc.power == pytest.approx(detect, abs=0.01)

    def test_high_snr_power(self):
        cfg = config(mean_signal=10.0)
        mc = monte_carlo_estimation(range(10), cfg, 20_000, seed=4)
        assert mc.power >= 0.999

    def test_per_device_override_changes_detectability(self):
        strong = tuple([10.0] * 5 + [1e-3] * 5)
        cfg = config(m=10, per_device_signal=strong)
        mc = monte_carlo_estimation(range(10), cfg, 2_000, seed=8)
        assert 4.5 <= mc.mean_estimate <= 5.5


class TestHypothesisConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"m": 0},
            {"alpha": 0.0},
            {"alpha": 1.0},
            {"mean_signal": 0.0},
            {"noise_sigma": -1.0},
        ],
    )
    def test_rejects_bad_fields(self, kwargs):
        base = {"m": 10, "alpha": 0.05, "mean_signal": 1.0, "noise_sigma": 1.0}
        base.update(kwargs)
        with pytest.raises(ValueError):
            HypothesisConfig(**base)

    def test_rejects_mismatched_override_length(self):
        with pytest.raises(ValueError):
            config(m=3, per_device_signal=(1.0, 2.0))
