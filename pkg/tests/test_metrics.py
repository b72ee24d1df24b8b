"""Evaluation quantities: RMSE, interval coverage, slab inclusion
probabilities, the pooled posterior-mean estimator, weight ESS, and
stage-window aggregation."""

import numpy as np
import pytest

from lenkf.errors import (
    BurnInTooLarge,
    DimensionMismatch,
    EmptyInput,
    TooFewSamples,
)
from lenkf.metrics import (
    coverage_probability,
    ess,
    inclusion_probability,
    posterior_mean_estimate,
    rmse_t,
    stage_window_mean,
)
from lenkf.models import MixtureGaussianPrior

SPARSE_PRIOR = MixtureGaussianPrior(0.0005, 0.01, 1.0)


class TestRmse:
    def test_exact_estimate(self):
        assert rmse_t(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0

    def test_unit_offset(self):
        assert rmse_t(np.ones(7), np.zeros(7)) == pytest.approx(1.0)

    def test_hand_value(self):
        # error (3, 4): norm 5 over sqrt(2)
        assert rmse_t(np.array([3.0, 4.0]), np.zeros(2)) == pytest.approx(5.0 / np.sqrt(2))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            rmse_t(np.zeros(2), np.zeros(3))

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            rmse_t(np.zeros(0), np.zeros(0))


class TestCoverage:
    def test_degenerate_samples_on_truth(self):
        samples = np.tile(np.array([1.0, 2.0]), (5, 1))
        assert coverage_probability(samples, np.array([1.0, 2.0])) == 1.0

    def test_distant_truth(self):
        samples = np.random.default_rng(0).standard_normal((50, 3))
        assert coverage_probability(samples, np.full(3, 1e6)) == 0.0

    def test_nominal_coverage(self):
        # truth and samples drawn from one law per component: the 95%
        # interval of the samples contains the truth 95% of the time
        gen = np.random.default_rng(1)
        truth = gen.standard_normal(10_000)
        samples = gen.standard_normal((400, 10_000))
        cp = coverage_probability(samples, truth)
        assert abs(cp - 0.95) < 0.01

    def test_gaussian_mode(self):
        gen = np.random.default_rng(2)
        truth = gen.standard_normal(2000)
        samples = gen.standard_normal((400, 2000))
        cp = coverage_probability(samples, truth, mode="gaussian")
        assert abs(cp - 0.95) < 0.02

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            coverage_probability(np.zeros((1, 2)), np.zeros(2))

    def test_component_mismatch(self):
        with pytest.raises(DimensionMismatch):
            coverage_probability(np.zeros((5, 2)), np.zeros(3))

    def test_bad_level_and_mode(self):
        with pytest.raises(ValueError):
            coverage_probability(np.zeros((5, 2)), np.zeros(2), level=1.0)
        with pytest.raises(ValueError):
            coverage_probability(np.zeros((5, 2)), np.zeros(2), mode="bands")

    def test_invariant_under_sample_reordering(self):
        gen = np.random.default_rng(3)
        samples = gen.standard_normal((100, 5))
        truth = gen.standard_normal(5)
        shuffled = samples.copy()
        gen.shuffle(shuffled, axis=0)
        assert coverage_probability(samples, truth) == coverage_probability(shuffled, truth)


class TestInclusionProbability:
    def test_symmetric_mixture_limit(self):
        # equal weights and (numerically) equal variances give even odds
        prior = MixtureGaussianPrior(0.5, 1.0, 1.0 + 1e-12)
        for beta in (0.0, 0.3, -2.0, 10.0):
            assert inclusion_probability(beta, prior) == pytest.approx(0.5, abs=1e-10)

    def test_origin_hand_value(self):
        # a = 0.0005/1, b = 0.9995/0.1
        expected = 0.0005 / (0.0005 + 9.995)
        assert inclusion_probability(0.0, SPARSE_PRIOR) == pytest.approx(expected, rel=1e-8)

    def test_slab_dominates_at_unit_coefficient(self):
        assert inclusion_probability(1.0, SPARSE_PRIOR) > 1.0 - 1e-15

    def test_even_in_beta(self):
        grid = np.linspace(0.0, 3.0, 50)
        np.testing.assert_allclose(
            inclusion_probability(grid, SPARSE_PRIOR),
            inclusion_probability(-grid, SPARSE_PRIOR),
        )

    def test_monotone_in_magnitude(self):
        grid = np.linspace(0.0, 5.0, 200)
        vals = inclusion_probability(grid, SPARSE_PRIOR)
        assert np.all(np.diff(vals) >= 0)

    def test_extreme_coefficient_stays_finite(self):
        val = inclusion_probability(100.0, SPARSE_PRIOR)
        assert 0.0 < val <= 1.0

    def test_vectorized_shape(self):
        out = inclusion_probability(np.zeros((3, 4)), SPARSE_PRIOR)
        assert out.shape == (3, 4)


class TestPosteriorMean:
    def test_constant_samples(self):
        stages = [np.full((3, 2), 7.0) for _ in range(5)]
        np.testing.assert_allclose(posterior_mean_estimate(stages, 2), [7.0, 7.0])

    def test_arithmetic_mean(self):
        stages = [np.array([[float(v)]]) for v in (1, 2, 3, 4)]
        np.testing.assert_allclose(posterior_mean_estimate(stages, 0), [2.5])

    def test_burn_in_drops_early_stages(self):
        stages = [np.array([[100.0]]), np.array([[1.0]]), np.array([[3.0]])]
        np.testing.assert_allclose(posterior_mean_estimate(stages, 1), [2.0])

    def test_burn_in_bounds(self):
        stages = [np.zeros((2, 1)) for _ in range(3)]
        with pytest.raises(BurnInTooLarge):
            posterior_mean_estimate(stages, 3)
        with pytest.raises(BurnInTooLarge):
            posterior_mean_estimate(stages, -1)


class TestEss:
    def test_uniform_weights(self):
        for k in (1, 5, 50):
            assert ess(np.zeros(k)) == pytest.approx(float(k))
        assert ess(np.full(10, -3.7)) == pytest.approx(10.0)

    def test_single_dominant_weight(self):
        logw = np.full(20, -np.inf)
        logw[3] = 0.0
        assert ess(logw) == pytest.approx(1.0)

    def test_hand_value(self):
        # weights 0.75/0.25: 1/(0.5625 + 0.0625)
        assert ess(np.array([0.0, -np.log(3.0)])) == pytest.approx(1.6)

    def test_all_zero_weights(self):
        assert ess(np.array([-np.inf, -np.inf])) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            ess(np.array([]))

    def test_shift_invariance(self):
        gen = np.random.default_rng(4)
        logw = gen.standard_normal(30)
        assert ess(logw) == pytest.approx(ess(logw + 123.4))


class TestStageWindowMean:
    def test_full_window(self):
        assert stage_window_mean(np.array([1.0, 2.0, 3.0]), 1, 3) == pytest.approx(2.0)

    def test_single_stage_window(self):
        assert stage_window_mean(np.array([1.0, 2.0, 3.0]), 2, 2) == pytest.approx(2.0)

    def test_tail_window(self):
        values = np.arange(1.0, 101.0)
        # stages 21..100 average to (21 + 100)/2
        assert stage_window_mean(values, 21, 100) == pytest.approx(60.5)

    def test_window_bounds(self):
        values = np.arange(5.0)
        with pytest.raises(DimensionMismatch):
            stage_window_mean(values, 0, 3)
        with pytest.raises(DimensionMismatch):
            stage_window_mean(values, 3, 2)
        with pytest.raises(DimensionMismatch):
            stage_window_mean(values, 1, 6)
