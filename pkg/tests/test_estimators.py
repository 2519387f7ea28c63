import math

import numpy as np
import pytest

from dirichlet_mc.estimators import (
    DegenerateCovarianceError,
    NoUsableSamplesError,
    QuadBatch,
    TripleBatch,
    centered_direct_density,
    conditional_expectation,
    direct_density,
    gaussian_kernel,
    generator_centering_z,
    ibp_residual_z,
    plain_kernel_density,
    regularized_density,
    shifted_kernel_density,
    weight_centering_z,
)
from dirichlet_mc.streams import chunk_rng


def gaussian_quads(n, seed, chunk_offset=0):
    g = chunk_rng(seed, chunk_offset).normal(size=n)
    return QuadBatch(g, np.ones(n), -0.5 * g, np.zeros(n))


def lognormal_quads(n, seed, chunk_offset=0):
    g = chunk_rng(seed, chunk_offset).normal(size=n)
    x = np.exp(g)
    return QuadBatch(x, x * x, 0.5 * x * (1 - g), 2.0 * x**3)


class TestGaussianKernel:
    def test_standard_normal_at_zero(self):
        assert gaussian_kernel(0.0, 1.0) == pytest.approx(0.3989422804014327, abs=1e-9)

    def test_narrow_kernel_value(self):
        assert gaussian_kernel(0.01, 0.01) == pytest.approx(3.9695254747, abs=1e-6)

    def test_bivariate_identity(self):
        assert gaussian_kernel([0.0, 0.0], np.eye(2)) == pytest.approx(1 / (2 * math.pi))

    def test_non_psd_rejected(self):
        with pytest.raises(ValueError, match="positive semidefinite"):
            gaussian_kernel([0.0, 0.0], np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            gaussian_kernel([0.0, 0.0], np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_degenerate_raises_by_default(self):
        with pytest.raises(DegenerateCovarianceError):
            gaussian_kernel(0.0, 1e-31)

    def test_degenerate_ridge_policy(self):
        v = gaussian_kernel(0.0, 0.0, ridge=True)
        assert math.isfinite(v) and v > 0

    def test_normalisation_1d(self):
        # ∫ g(x - μ, σ²) dx = 1 by trapezoid over ±8 standard deviations
        mu, var = 0.3, 0.7
        xs = np.linspace(mu - 8 * math.sqrt(var), mu + 8 * math.sqrt(var), 4001)
        vals = [gaussian_kernel(x - mu, var) for x in xs]
        assert np.trapezoid(vals, xs) == pytest.approx(1.0, abs=1e-6)

    def test_normalisation_2d(self):
        cov = np.array([[1.0, 0.3], [0.3, 0.5]])
        lim = 8.0
        xs = np.linspace(-lim, lim, 201)
        ys = np.linspace(-lim, lim, 201)
        grid = np.array([[gaussian_kernel([x, y], cov) for y in ys] for x in xs])
        inner = np.trapezoid(grid, ys, axis=1)
        assert np.trapezoid(inner, xs) == pytest.approx(1.0, abs=1e-6)


class TestKernelEstimators:
    def test_single_sample_spot_value(self):
        tb = TripleBatch(np.array([0.0]), np.array([1.0]), np.array([0.0]))
        assert shifted_kernel_density(tb, 1.0, [0.0])[0].value == pytest.approx(
            0.3989422804014327
        )

    def test_shift_cancels_offset(self):
        tb = TripleBatch(np.array([0.0]), np.array([1.0]), np.array([1.0]))
        est = shifted_kernel_density(tb, 0.01, [0.01])[0]
        assert est.value == pytest.approx(gaussian_kernel(0.0, 0.01), rel=1e-14)

    def test_zero_shift_matches_gamma_baseline_exactly(self):
        g = chunk_rng(0, 0).normal(size=500)
        tb = TripleBatch(g, np.full(500, 1.3), np.zeros(500))
        a = shifted_kernel_density(tb, 0.2, [0.1, 0.4])
        b = plain_kernel_density(tb, 0.2, [0.1, 0.4], variant="gamma_cov")
        assert all(x.value == y.value and x.std_error == y.std_error for x, y in zip(a, b))

    def test_identity_cov_spot_value(self):
        tb = TripleBatch(np.array([0.0]), np.array([2.0]), np.array([5.0]))
        est = plain_kernel_density(tb, 1.0, [0.0], variant="identity_cov")[0]
        assert est.value == pytest.approx(0.3989422804014327)

    def test_unknown_variant_rejected(self):
        tb = TripleBatch(np.array([0.0]), np.array([1.0]), np.array([0.0]))
        with pytest.raises(ValueError, match="variant"):
            plain_kernel_density(tb, 1.0, [0.0], variant="typo")

    def test_estimate_mass_integrates_to_one_gaussian(self):
        b = gaussian_quads(4000, 1).triple_batch()
        eps = 0.05
        xs = np.linspace(-6.0, 6.0, 4001)
        vals = [e.value for e in shifted_kernel_density(b, eps, xs)]
        assert np.trapezoid(vals, xs) == pytest.approx(1.0, abs=1e-5)

    def test_estimate_mass_integrates_to_one_lognormal(self):
        # restrict to a sub-batch whose kernel widths the grid resolves
        full = lognormal_quads(4000, 1)
        keep = (full.x > 0.2) & (full.x < 5.0)
        b = TripleBatch(full.x[keep], full.gamma[keep], full.a[keep])
        eps = 0.05
        xs = np.linspace(-2.0, 9.0, 8001)
        vals = [e.value for e in shifted_kernel_density(b, eps, xs)]
        assert np.trapezoid(vals, xs) == pytest.approx(1.0, abs=1e-4)

    def test_degenerate_samples_skipped_and_counted(self):
        x = np.array([0.0, 1.0, 2.0])
        gam = np.array([1.0, 0.0, 1.0])  # middle sample has zero covariance
        tb = TripleBatch(x, gam, np.zeros(3))
        est = shifted_kernel_density(tb, 0.5, [0.5])[0]
        assert est.n_used == 2

    def test_all_degenerate_is_an_error(self):
        tb = TripleBatch(np.zeros(4), np.zeros(4), np.zeros(4))
        with pytest.raises(NoUsableSamplesError):
            shifted_kernel_density(tb, 0.5, [0.0])

    def test_ridge_policy_uses_all_samples(self):
        x = np.array([0.0, 1.0, 2.0])
        tb = TripleBatch(x, np.array([1.0, 0.0, 1.0]), np.zeros(3))
        est = shifted_kernel_density(tb, 0.5, [0.5], degenerate="ridge")[0]
        assert est.n_used == 3

    def test_vectorised_matches_scalar_kernel(self):
        rng = chunk_rng(12, 0)
        x = rng.normal(size=50)
        gam = rng.uniform(0.5, 2.0, size=50)
        a = rng.normal(size=50)
        tb = TripleBatch(x, gam, a)
        eps, q = 0.3, 0.7
        est = shifted_kernel_density(tb, eps, [q])[0]
        ref = np.mean([gaussian_kernel(q - xi - eps * ai, eps * gi) for xi, gi, ai in zip(x, gam, a)])
        assert est.value == pytest.approx(float(ref), rel=1e-12)


class TestDirectDensity:
    def test_gaussian_at_zero(self):
        est = direct_density(gaussian_quads(100_000, 1), [0.0])[0]
        assert abs(est.value - 0.3989422804014327) < 4 * est.std_error

    def test_lognormal_at_one(self):
        est = direct_density(lognormal_quads(100_000, 2), [1.0])[0]
        assert abs(est.value - 0.3989422804014327) < 4 * est.std_error

    def test_far_tail_is_centering(self):
        b = gaussian_quads(100_000, 3)
        est = direct_density(b, [60.0])[0]
        assert abs(est.value) < 4 * est.std_error

    def test_zero_gamma_samples_excluded_and_reported(self):
        b = QuadBatch(
            np.array([0.0, 1.0, 2.0]),
            np.array([1.0, 0.0, 1.0]),
            np.array([0.1, 0.2, 0.3]),
            np.zeros(3),
        )
        est = direct_density(b, [1.0])[0]
        assert est.n_used == 2

    def test_no_positive_gamma_is_an_error(self):
        b = QuadBatch(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3))
        with pytest.raises(NoUsableSamplesError):
            direct_density(b, [0.0])


class TestRegularizedDensity:
    def test_constant_gamma_scaling(self):
        b = gaussian_quads(100_000, 4)
        for eps in (0.5, 0.1):
            est = regularized_density(b, eps, [0.0])[0]
            ref = 0.3989422804014327 / (1.0 + eps)
            assert abs(est.value - ref) < 4 * est.std_error

    def test_large_epsilon_kills_the_weight(self):
        b = gaussian_quads(10_000, 5)
        est = regularized_density(b, 1e9, [0.0])[0]
        assert abs(est.value) < 1e-8

    def test_positive_epsilon_required(self):
        with pytest.raises(ValueError):
            regularized_density(gaussian_quads(10, 0), 0.0, [0.0])


class TestConditionalExpectation:
    def _pair_batch(self, n, seed):
        rng = chunk_rng(seed, 0)
        g1, g2 = rng.normal(size=n), rng.normal(size=n)
        c, s = np.cos(g2), np.sin(g2)
        return QuadBatch(
            g1 + s, 1 + c * c, -0.5 * g1 - 0.5 * g2 * c - 0.5 * s,
            -c * np.sin(2 * g2), g=s, gamma_x_g=c * c,
        )

    def test_constant_g_reduces_to_direct_bitwise(self):
        b = gaussian_quads(5000, 6)
        b1 = QuadBatch(b.x, b.gamma, b.a, b.gamma_x_gammax, g=np.ones(b.n), gamma_x_g=np.zeros(b.n))
        ce = conditional_expectation(b1, [0.3])[0]
        dd = direct_density(b1, [0.3])[0]
        assert ce.numerator.value == dd.value
        assert ce.numerator.std_error == dd.std_error
        assert ce.ratio == 1.0

    def test_conditional_mean_of_x_given_x(self):
        # G = X: the ratio estimates E[X | X = x] = x
        b = lognormal_quads(100_000, 7)
        with_aux = QuadBatch(
            b.x, b.gamma, b.a, b.gamma_x_gammax, g=b.x, gamma_x_g=b.gamma
        )
        ce = conditional_expectation(with_aux, [1.0])[0]
        assert ce.reliable
        assert abs(ce.ratio - 1.0) < 4 * ce.ratio_std_error

    def test_missing_aux_rejected(self):
        with pytest.raises(ValueError, match="auxiliary"):
            conditional_expectation(gaussian_quads(100, 0), [0.0])

    def test_unreliable_flag_in_the_far_tail(self):
        ce = conditional_expectation(self._pair_batch(2000, 8), [80.0])[0]
        assert not ce.reliable


class TestCenteredDirect:
    def test_forced_zero_matches_direct_on_second_half(self):
        b = lognormal_quads(20_000, 9)
        _, h2 = b.halves()
        cd = centered_direct_density(b, [1.0], force_c=0.0)[0]
        dd = direct_density(h2, [1.0])[0]
        assert cd.value == dd.value and cd.std_error == dd.std_error

    def test_symmetric_scenario_keeps_estimate(self):
        b = gaussian_quads(100_000, 10)
        _, h2 = b.halves()
        cd = centered_direct_density(b, [0.0])[0]
        dd = direct_density(h2, [0.0])[0]
        # at the symmetry point the fitted constant is ~0, so both agree
        assert abs(cd.value - dd.value) < 2 * math.hypot(cd.std_error, dd.std_error)

    def test_variance_reduction_reported_on_lognormal(self):
        b = lognormal_quads(100_000, 11)
        _, h2 = b.halves()
        cd = centered_direct_density(b, [1.0])[0]
        dd = direct_density(h2, [1.0])[0]
        print(
            f"control variate variance ratio at x=1: {(cd.std_error / dd.std_error) ** 2:.3f}"
        )
        assert cd.std_error > 0

    def test_mean_invariance_across_seeds(self):
        # estimator mean is unchanged by the control variate
        diffs, ses = [], []
        for seed in range(50):
            b = lognormal_quads(4000, 100 + seed)
            _, h2 = b.halves()
            cd = centered_direct_density(b, [1.0])[0]
            dd = direct_density(h2, [1.0])[0]
            diffs.append(cd.value - dd.value)
            ses.append(math.hypot(cd.std_error, dd.std_error))
        mean_diff = float(np.mean(diffs))
        combined_se = float(np.mean(ses)) / math.sqrt(len(diffs))
        assert abs(mean_diff) < 3 * combined_se

    def test_degenerate_first_half_falls_back_to_zero(self):
        x = np.concatenate([np.zeros(10), chunk_rng(0, 0).normal(size=10)])
        gam = np.concatenate([np.zeros(10), np.ones(10)])  # half 1 unusable
        b = QuadBatch(x, gam, np.zeros(20), np.zeros(20))
        est = centered_direct_density(b, [0.5])[0]
        assert math.isfinite(est.value)


class TestIdentityStatistics:
    def test_ibp_sides_match_closed_form_gaussian_cos(self):
        # both sides of the relation are ∓ e^{-1/2}/(1+ε) at ε = 0.5
        b = gaussian_quads(100_000, 12)
        eps = 0.5
        lhs = -np.cos(b.x) * b.gamma / (eps + b.gamma)
        side = float(np.mean(lhs))
        se = float(np.std(lhs, ddof=1)) / math.sqrt(b.n)
        assert abs(side - (-math.exp(-0.5) / 1.5)) < 4 * se
        z = ibp_residual_z(b, lambda x: -np.sin(x), lambda x: -np.cos(x), eps)
        assert abs(z) < 4.0

    def test_ibp_affine_phi_reduces_to_centering(self):
        b = lognormal_quads(100_000, 13)
        z = ibp_residual_z(b, lambda x: np.ones_like(x), lambda x: np.zeros_like(x), 0.5)
        assert abs(z) < 4.0

    def test_ibp_triangular_quadratic_phi(self):
        rng = chunk_rng(14, 0)
        u = rng.uniform(size=(100_000, 2))
        gam_i = (u * (1 - u)) ** 2
        a_i = u * (1 - u) * (1 - 2 * u)
        b = QuadBatch(u.sum(1), gam_i.sum(1), a_i.sum(1), (2 * a_i * gam_i).sum(1))
        z = ibp_residual_z(b, lambda x: 2 * x, lambda x: 2 * np.ones_like(x), 0.1)
        assert abs(z) < 4.0

    def test_weight_centering_every_quad_scenario(self):
        for make, seed in ((gaussian_quads, 15), (lognormal_quads, 16)):
            assert abs(weight_centering_z(make(100_000, seed))) < 4.0

    def test_generator_centering_catches_shifted_a(self):
        b = gaussian_quads(100_000, 17)
        shifted = QuadBatch(b.x, b.gamma, b.a + 0.1, b.gamma_x_gammax)
        z = generator_centering_z(
            shifted, lambda x: np.ones_like(x), lambda x: np.zeros_like(x)
        )
        assert abs(z) > 4.0


class TestBatches:
    def test_from_raw_counts_invalid(self):
        x = np.array([0.0, math.nan, 1.0])
        b = QuadBatch.from_raw(x, np.ones(3), np.zeros(3), np.zeros(3))
        assert b.n == 2 and b.invalid_count == 1

    def test_aux_must_come_in_pairs(self):
        with pytest.raises(ValueError, match="together"):
            QuadBatch(np.zeros(2), np.ones(2), np.zeros(2), np.zeros(2), g=np.ones(2))

    def test_triple_batch_shapes(self):
        b = gaussian_quads(10, 0)
        tb = b.triple_batch()
        assert tb.x.shape == (10, 1) and tb.gamma.shape == (10, 1, 1)

    def test_estimates_deterministic(self):
        a = direct_density(gaussian_quads(50_000, 18), [0.2])[0]
        b = direct_density(gaussian_quads(50_000, 18), [0.2])[0]
        assert a.value == b.value and a.std_error == b.std_error
