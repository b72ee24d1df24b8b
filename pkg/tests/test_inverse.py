"""Static inverse problems: gain, forecast/analysis moves, the linear and
augmented nonlinear runners, and the drift equivalence that ties the
composite move to a preconditioned Langevin step."""

import numpy as np
import pytest

from lenkf.errors import DimensionMismatch, EnsembleTooSmall
from lenkf.inverse import (
    _draw_block,
    augmented_grad,
    kalman_gain,
    lenkf_analysis,
    lenkf_forecast,
    run_linear_inverse,
    run_nonlinear_inverse,
    sgrld_drift,
)
from lenkf.models import (
    GaussianPrior,
    LinearForward,
    RegressionDataset,
    generate_regression,
    regression_model,
)
from lenkf.numkit import (
    DenseSPD,
    Diagonal,
    PhiloxCursor,
    ScaledIdentity,
    sample_gaussian,
    solve_spd,
)
from lenkf.records import RecordSpec
from lenkf.schedule import Constant


def random_spd(rng, dim):
    a = rng.standard_normal((dim, dim))
    return a @ a.T + dim * np.eye(dim)


class TestKalmanGain:
    def test_scalar_half(self):
        k = kalman_gain(ScaledIdentity(1.0, 1), np.array([[1.0]]), ScaledIdentity(1.0, 1))
        np.testing.assert_allclose(k, [[0.5]])

    def test_zero_measurement_matrix(self):
        k = kalman_gain(ScaledIdentity(1.0, 3), np.zeros((2, 3)), ScaledIdentity(1.0, 2))
        np.testing.assert_array_equal(k, np.zeros((3, 2)))

    def test_scalar_hand_value(self):
        # qh/(h^2 q + r) = 0.2/2.4
        k = kalman_gain(ScaledIdentity(0.1, 1), np.array([[2.0]]), ScaledIdentity(2.0, 1))
        np.testing.assert_allclose(k, [[0.2 / 2.4]], rtol=1e-12)

    def test_information_form_identity(self):
        # K = (H^T R^-1 H + Q^-1)^-1 H^T R^-1 whenever Q is invertible
        rng = np.random.default_rng(0)
        for _ in range(10):
            p, n = 6, 4
            q = random_spd(rng, p)
            r = random_spd(rng, n)
            h = rng.standard_normal((n, p))
            k = kalman_gain(DenseSPD(q), h, DenseSPD(r))
            rinv = np.linalg.inv(r)
            info = np.linalg.inv(h.T @ rinv @ h + np.linalg.inv(q)) @ h.T @ rinv
            np.testing.assert_allclose(k, info, atol=1e-8)

    def test_shape_and_row_vector_promotion(self):
        k = kalman_gain(ScaledIdentity(1.0, 2), np.array([1.0, 0.0]), ScaledIdentity(1.0, 1))
        assert k.shape == (2, 1)

    def test_dimension_mismatches(self):
        with pytest.raises(DimensionMismatch):
            kalman_gain(ScaledIdentity(1.0, 3), np.ones((2, 4)), ScaledIdentity(1.0, 2))
        with pytest.raises(DimensionMismatch):
            kalman_gain(ScaledIdentity(1.0, 3), np.ones((2, 3)), ScaledIdentity(1.0, 5))


class TestLenkfForecast:
    def test_zero_rate_zero_noise_is_identity(self):
        x = np.array([1.0, -2.0])
        out = lenkf_forecast(x, np.array([5.0, 5.0]), 0.0, 1.0)
        np.testing.assert_array_equal(out, x)

    def test_degenerate_noise_is_identity_with_rng(self):
        x = np.array([1.0, -2.0])
        gen = np.random.default_rng(0)
        out = lenkf_forecast(x, np.zeros(2), 0.3, 1.0, q=ScaledIdentity(0.0, 2), rng=gen)
        np.testing.assert_array_equal(out, x)

    def test_pure_diffusion(self):
        x = np.zeros(3)
        w = np.array([0.1, -0.2, 0.3])
        out = lenkf_forecast(x, np.zeros(3), 0.5, 1.0, noise=w)
        np.testing.assert_array_equal(out, w)

    def test_hand_value(self):
        # x=2, standard-normal score -2, eps=0.1, full batch: 2 + 0.05*(-2)
        out = lenkf_forecast(np.array([2.0]), np.array([-2.0]), 0.1, 1.0)
        np.testing.assert_allclose(out, [1.9])

    def test_batch_fraction_scales_drift(self):
        out = lenkf_forecast(np.array([2.0]), np.array([-2.0]), 0.1, 0.5)
        np.testing.assert_allclose(out, [1.95])

    def test_rng_draw_matches_manual_sample(self):
        x = np.ones(4)
        q = Diagonal(np.array([1.0, 2.0, 3.0, 4.0]))
        out = lenkf_forecast(x, np.zeros(4), 0.2, 0.25, q=q, rng=np.random.default_rng(7))
        w = sample_gaussian(np.zeros(4), q.scaled(0.25), np.random.default_rng(7))
        np.testing.assert_array_equal(out, x + w)

    def test_vectorized_over_chains(self):
        x = np.arange(6.0).reshape(3, 2)
        grad = np.ones((3, 2))
        out = lenkf_forecast(x, grad, 0.2, 1.0)
        np.testing.assert_allclose(out, x + 0.1)


class TestLenkfAnalysis:
    def test_zero_gain_keeps_forecast(self):
        x_f = np.array([1.0, 2.0])
        out = lenkf_analysis(x_f, np.zeros((2, 2)), np.array([9.0, 9.0]), np.eye(2))
        np.testing.assert_array_equal(out, x_f)

    def test_zero_innovation_keeps_forecast(self):
        x_f = np.array([1.0, 2.0])
        h = np.array([[1.0, 1.0]])
        out = lenkf_analysis(x_f, np.full((2, 1), 0.7), x_f @ h.T, h)
        np.testing.assert_array_equal(out, x_f)

    def test_hand_value(self):
        out = lenkf_analysis(np.array([0.0]), np.array([[0.5]]), np.array([1.0]), np.eye(1))
        np.testing.assert_allclose(out, [0.5])

    def test_explicit_noise_subtracted(self):
        out = lenkf_analysis(
            np.array([0.0]), np.array([[0.5]]), np.array([1.0]), np.eye(1),
            noise=np.array([0.4]),
        )
        np.testing.assert_allclose(out, [0.3])

    def test_rng_without_r_rejected(self):
        with pytest.raises(DimensionMismatch):
            lenkf_analysis(np.zeros(2), np.zeros((2, 2)), np.zeros(2), np.eye(2),
                           rng=np.random.default_rng(0))

    def test_rng_draw_matches_manual_sample(self):
        x_f = np.zeros(2)
        h = np.eye(2)
        gain = 0.5 * np.eye(2)
        r = ScaledIdentity(0.8, 2)
        out = lenkf_analysis(x_f, gain, np.ones(2), h, r=r, frac=0.5,
                             rng=np.random.default_rng(3))
        v = sample_gaussian(np.zeros(2), r.scaled(0.5), np.random.default_rng(3))
        np.testing.assert_array_equal(out, x_f + (np.ones(2) - v) @ gain.T)


class TestSgrldEquivalence:
    def test_composite_equals_drift_formula(self):
        # noise-suppressed forecast+analysis is the preconditioned
        # Langevin step with the inflated gain and the plain V data term
        rng = np.random.default_rng(5)
        for _ in range(25):
            p = int(rng.integers(2, 8))
            n = int(rng.integers(1, 6))
            m = int(rng.integers(1, 5))
            eps = float(rng.uniform(0.01, 0.5))
            frac = float(rng.uniform(0.1, 1.0))
            x = rng.standard_normal((m, p))
            grad = rng.standard_normal((m, p))
            y = rng.standard_normal(n)
            h = rng.standard_normal((n, p))
            v = DenseSPD(random_spd(rng, n))
            gain = kalman_gain(ScaledIdentity(eps, p), h, v.scaled(2.0))
            composite = lenkf_analysis(lenkf_forecast(x, grad, eps, frac), gain, y, h)
            drift = sgrld_drift(x, grad, y, h, v, gain, eps, frac)
            np.testing.assert_allclose(composite, drift, rtol=1e-10, atol=1e-12)


def small_dataset(seed=0, n_obs=20, dim=3, block_size=5):
    beta = np.zeros(dim)
    beta[0] = 1.0
    return generate_regression(n_obs, dim, beta, 0.3, block_size, seed)


class TestRunLinearInverse:
    def test_single_stage_matches_manual_composition(self):
        data = small_dataset()
        prior = GaussianPrior(np.zeros(3), ScaledIdentity(1.0, 3))
        model = regression_model(data, prior)
        sched = Constant(0.05)
        init = np.array([[0.2, -0.1, 0.4]])
        result = run_linear_inverse(model, data, 1, sched, 1, seed=17, init=init)

        cursor = PhiloxCursor(17)
        frac = data.block_size / data.n_obs
        b = int(cursor.seek(1, 0, 0, "batch").integers(data.n_blocks))
        y_b, h_b = data.block(b)
        r_spec = model.obs_block_cov.scaled(2.0)
        gain = kalman_gain(ScaledIdentity(0.05, 3), h_b, r_spec)
        grad = prior.grad_log_density(init)
        w = np.sqrt(frac * 0.05) * cursor.seek(1, 0, 0, "process").standard_normal(3)
        forecast = lenkf_forecast(init, grad, 0.05, frac, noise=w)
        v = r_spec.scaled(frac).sample(np.zeros(data.block_size), cursor.seek(1, 0, 0, "measure"))
        manual = lenkf_analysis(forecast, gain, y_b, h_b, noise=v)
        np.testing.assert_array_equal(result.final_members, manual)

    def test_deterministic_replay_and_seed_sensitivity(self):
        data = small_dataset()
        prior = GaussianPrior(np.zeros(3), ScaledIdentity(1.0, 3))
        model = regression_model(data, prior)
        sched = Constant(0.05)
        a = run_linear_inverse(model, data, 4, sched, 10, seed=3)
        b = run_linear_inverse(model, data, 4, sched, 10, seed=3)
        c = run_linear_inverse(model, data, 4, sched, 10, seed=4)
        np.testing.assert_array_equal(a.final_members, b.final_members)
        assert not np.array_equal(a.final_members, c.final_members)

    def test_recording_cadence(self):
        data = small_dataset()
        prior = GaussianPrior(np.zeros(3), ScaledIdentity(1.0, 3))
        model = regression_model(data, prior)
        sched = Constant(0.05)
        spec = RecordSpec(stage_stride=3, components=(0, 2))
        result = run_linear_inverse(model, data, 2, sched, 7, seed=5, record=spec)
        rows = list(result.record.sample_rows())
        assert sorted({t for t, *_ in rows}) == [3, 6]
        assert sorted({comp for _, _, _, comp, _ in rows}) == [0, 2]

    def test_hooks_see_every_stage(self):
        data = small_dataset()
        prior = GaussianPrior(np.zeros(3), ScaledIdentity(1.0, 3))
        model = regression_model(data, prior)
        seen = []
        run_linear_inverse(model, data, 2, Constant(0.05), 5,
                           seed=6, hooks=[lambda t, mem: seen.append((t, mem.shape))])
        assert seen == [(t, (2, 3)) for t in range(1, 6)]

    def test_validation_errors(self):
        data = small_dataset()
        prior = GaussianPrior(np.zeros(3), ScaledIdentity(1.0, 3))
        model = regression_model(data, prior)
        sched = Constant(0.05)
        with pytest.raises(EnsembleTooSmall):
            run_linear_inverse(model, data, 0, sched, 3, seed=0)
        with pytest.raises(DimensionMismatch):
            run_linear_inverse(model, data, 2, sched, 3, seed=0, init=np.zeros((3, 3)))
        bad = regression_model(data, prior)
        bad.log_prior_grad = None
        with pytest.raises(DimensionMismatch):
            run_linear_inverse(bad, data, 2, sched, 3, seed=0)

    def test_full_batch_conjugate_posterior(self):
        # single full block: the invariant law is the conjugate Gaussian
        # posterior, so the pooled post-burn average must sit on its mean
        n_obs, p = 20, 2
        data = small_dataset(seed=2, n_obs=n_obs, dim=p, block_size=n_obs)
        prior = GaussianPrior(np.zeros(p), ScaledIdentity(1.0, p))
        model = regression_model(data, prior)
        h = data.design
        oracle = np.linalg.solve(h.T @ h + np.eye(p), h.T @ data.response)
        sched = Constant(5e-3)
        total = np.zeros(p)
        count = 0

        def tally(t, members):
            nonlocal count
            if t > 2000:
                total[:] += members.mean(axis=0)
                count += 1

        run_linear_inverse(model, data, 30, sched, 6000, seed=9, hooks=[tally],
                           record=RecordSpec(stage_stride=0))
        est = total / count
        assert np.max(np.abs(est - oracle)) < 0.05


class TestDrawBlock:
    def test_uniform_mode_depends_only_on_stage(self):
        a = _draw_block(PhiloxCursor(1), 5, 10, False, {})
        b = _draw_block(PhiloxCursor(1), 5, 10, False, {})
        assert a == b
        assert 0 <= a < 10

    def test_epoch_mode_cycles_every_block_once(self):
        cursor = PhiloxCursor(2)
        state: dict = {}
        n_blocks = 7
        first = [_draw_block(cursor, t, n_blocks, True, state) for t in range(1, n_blocks + 1)]
        second = [_draw_block(cursor, t, n_blocks, True, state)
                  for t in range(n_blocks + 1, 2 * n_blocks + 1)]
        assert sorted(first) == list(range(n_blocks))
        assert sorted(second) == list(range(n_blocks))
        assert first != second  # reshuffled across epochs (astronomically unlikely to tie)


class QuadraticForward:
    """1-D test map G(z) = z^2 with exact Jacobian transpose."""

    def response(self, z, rows):
        z2d = np.atleast_2d(np.asarray(z, dtype=float))
        out = np.repeat(z2d[:, 0:1] ** 2, rows.size, axis=1)
        return out if np.asarray(z).ndim == 2 else out[0]

    def jacobian_transpose(self, z, rows, resid):
        z2d = np.atleast_2d(np.asarray(z, dtype=float))
        r2d = np.atleast_2d(np.asarray(resid, dtype=float))
        out = 2.0 * z2d[:, 0:1] * np.sum(r2d, axis=1, keepdims=True)
        return out if np.asarray(z).ndim == 2 else out[0]


class TestAugmentedGrad:
    def setup_method(self):
        self.fwd = QuadraticForward()
        self.rows = np.arange(1)
        self.flat = lambda z: np.zeros_like(np.asarray(z, dtype=float))

    def test_zero_residual(self):
        z = np.array([1.3])
        gamma = self.fwd.response(z, self.rows)
        top, bottom = augmented_grad(z, gamma, self.fwd, self.rows, self.flat,
                                     ScaledIdentity(1.0, 1), 0.5, 1)
        np.testing.assert_array_equal(top, np.zeros(1))
        np.testing.assert_array_equal(bottom, np.zeros(1))
        prior = lambda z: -np.asarray(z, dtype=float)
        top, _ = augmented_grad(z, gamma, self.fwd, self.rows, prior,
                                ScaledIdentity(1.0, 1), 0.5, 1)
        np.testing.assert_array_equal(top, -z)

    def test_hand_value(self):
        # G(z)=z^2, z=1, gamma=2, V=1, alpha=0.5, full batch, flat prior
        top, bottom = augmented_grad(np.array([1.0]), np.array([2.0]), self.fwd,
                                     self.rows, self.flat, ScaledIdentity(1.0, 1), 0.5, 1)
        np.testing.assert_allclose(top, [4.0])
        np.testing.assert_allclose(bottom, [-2.0])

    def test_doubling_alpha_halves_residual_terms(self):
        z, gamma = np.array([1.0]), np.array([2.0])
        args = (self.fwd, self.rows, self.flat, ScaledIdentity(1.0, 1))
        top1, bot1 = augmented_grad(z, gamma, *args, 0.4, 1)
        top2, bot2 = augmented_grad(z, gamma, *args, 0.8, 1)
        np.testing.assert_allclose(top1, 2.0 * top2)
        np.testing.assert_allclose(bot1, 2.0 * bot2)

    def test_batch_scaling(self):
        # rows of size 1 out of 10 total observations: N/n = 10
        top, _ = augmented_grad(np.array([1.0]), np.array([2.0]), self.fwd,
                                self.rows, self.flat, ScaledIdentity(1.0, 1), 0.5, 10)
        np.testing.assert_allclose(top, [40.0])

    def test_top_block_is_gradient_of_augmented_logdensity(self):
        # finite differences of log pi(z) - (N/n)/(2 alpha) |gamma - G(z)|^2 / V
        alpha, n_total, vval = 0.7, 4, 1.5
        gamma = np.array([1.8])
        prior = lambda z: -np.asarray(z, dtype=float)

        def logdens(zval):
            resid = gamma[0] - zval**2
            return -0.5 * zval**2 - (n_total / 1) / (2.0 * alpha) * resid**2 / vval

        z0 = 0.9
        h = 1e-6
        fd = (logdens(z0 + h) - logdens(z0 - h)) / (2 * h)
        top, _ = augmented_grad(np.array([z0]), gamma, self.fwd, self.rows, prior,
                                ScaledIdentity(vval, 1), alpha, n_total)
        np.testing.assert_allclose(top, [fd], atol=1e-5)

    def test_vectorized_over_chains(self):
        z = np.array([[1.0], [2.0]])
        gamma = np.array([[2.0], [4.0]])
        top, bottom = augmented_grad(z, gamma, self.fwd, self.rows, self.flat,
                                     ScaledIdentity(1.0, 1), 0.5, 1)
        assert top.shape == (2, 1)
        assert bottom.shape == (2, 1)
        np.testing.assert_allclose(top[0], [4.0])
        np.testing.assert_allclose(bottom[0], [-2.0])


class TestRunNonlinearInverse:
    def _common(self):
        rng = np.random.default_rng(12)
        design = rng.standard_normal((4, 2))
        z_true = np.array([1.0, -0.5])
        y = design @ z_true + 0.5 * rng.standard_normal(4)
        return design, y

    def test_alpha_range_enforced(self):
        design, y = self._common()
        fwd = LinearForward(design)
        for alpha in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                run_nonlinear_inverse(y, fwd, np.arange(4).reshape(1, 4),
                                      lambda z: -z, ScaledIdentity(1.0, 4), alpha,
                                      2, 2, Constant(0.01), 3,
                                      seed=0, init=np.zeros((2, 2)))

    def test_init_shape_enforced(self):
        design, y = self._common()
        fwd = LinearForward(design)
        with pytest.raises(DimensionMismatch):
            run_nonlinear_inverse(y, fwd, np.arange(4).reshape(1, 4),
                                  lambda z: -z, ScaledIdentity(1.0, 4), 0.5,
                                  3, 2, Constant(0.01), 3,
                                  seed=0, init=np.zeros((2, 2)))

    def test_chain_count_enforced(self):
        design, y = self._common()
        with pytest.raises(EnsembleTooSmall):
            run_nonlinear_inverse(y, LinearForward(design), np.arange(4).reshape(1, 4),
                                  lambda z: -z, ScaledIdentity(1.0, 4), 0.5,
                                  0, 2, Constant(0.01), 3,
                                  seed=0, init=np.zeros((0, 2)))

    def test_gamma_restarts_at_block_values(self):
        # with a vanishing rate the within-stage updates cannot move gamma,
        # so after every stage it must still sit on that stage's block
        design, y = self._common()
        fwd = LinearForward(design)
        blocks = np.array([[0, 1], [2, 3]])
        seen = []
        run_nonlinear_inverse(y, fwd, blocks, lambda z: -z, ScaledIdentity(1.0, 2),
                              0.5, 2, 3, Constant(1e-12), 4,
                              seed=8, init=np.zeros((2, 2)),
                              hooks=[lambda t, k, z, g: seen.append((t, k, g.copy()))])
        cursor = PhiloxCursor(8)
        for t in range(1, 5):
            b = int(cursor.seek(t, 0, 0, "batch").integers(2))
            y_b = y[blocks[b]]
            for tt, k, g in seen:
                if tt == t:
                    assert np.max(np.abs(g - y_b[None, :])) < 1e-4

    def test_deterministic_replay(self):
        design, y = self._common()
        fwd = LinearForward(design)
        blocks = np.arange(4).reshape(1, 4)
        kw = dict(seed=5, init=np.full((3, 2), 0.1))
        a = run_nonlinear_inverse(y, fwd, blocks, lambda z: -z, ScaledIdentity(1.0, 4),
                                  0.9, 3, 2, Constant(0.01), 6, **kw)
        b = run_nonlinear_inverse(y, fwd, blocks, lambda z: -z, ScaledIdentity(1.0, 4),
                                  0.9, 3, 2, Constant(0.01), 6, **kw)
        np.testing.assert_array_equal(a.final_members, b.final_members)

    def test_records_only_last_inner_iteration_by_default(self):
        design, y = self._common()
        fwd = LinearForward(design)
        blocks = np.arange(4).reshape(1, 4)
        res = run_nonlinear_inverse(y, fwd, blocks, lambda z: -z, ScaledIdentity(1.0, 4),
                                    0.9, 2, 3, Constant(0.01), 4,
                                    seed=5, init=np.zeros((2, 2)))
        rows = list(res.record.sample_rows())
        assert {k for _, k, *_ in rows} == {3}
        assert sorted({t for t, *_ in rows}) == [1, 2, 3, 4]

    def test_linear_forward_recovers_conjugate_posterior(self):
        # G(z) = Hz makes the z-marginal the usual Gaussian posterior
        rng = np.random.default_rng(21)
        p, n = 2, 4
        design = rng.standard_normal((n, p))
        z_true = np.array([1.0, -1.0])
        y = design @ z_true + rng.standard_normal(n)
        oracle = np.linalg.solve(design.T @ design + np.eye(p), design.T @ y)
        fwd = LinearForward(design)
        blocks = np.arange(n).reshape(1, n)
        total = np.zeros(p)
        count = 0

        def tally(t, k, z, gamma):
            nonlocal count
            if t > 600 and k == 3:
                total[:] += z.mean(axis=0)
                count += 1

        run_nonlinear_inverse(y, fwd, blocks, lambda z: -z, ScaledIdentity(1.0, n),
                              0.9, 20, 3, Constant(0.02), 2000,
                              seed=30, init=np.zeros((20, p)),
                              record=RecordSpec(stage_stride=0), hooks=[tally])
        est = total / count
        assert np.max(np.abs(est - oracle)) < 0.1
