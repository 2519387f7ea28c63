import math

import numpy as np
import pytest

from dirichlet_mc.coords import mc_unit, opaque, ou_gaussian
from dirichlet_mc.quadrature import (
    kernel_moment_integral,
    law_integral,
    normal_pdf,
    quadrature_expectation,
)


class TestTensorExpectation:
    def test_constant_integrand(self):
        val = quadrature_expectation(lambda u: np.ones(u.shape[0]), [ou_gaussian(1.0)], order=8)
        assert val == pytest.approx(1.0, abs=1e-14)

    def test_second_gaussian_moment(self):
        val = quadrature_expectation(lambda u: u[:, 0] ** 2, [ou_gaussian(1.0)], order=32)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_exponential_moment(self):
        val = quadrature_expectation(lambda u: np.exp(u[:, 0]), [ou_gaussian(1.0)], order=64)
        assert val == pytest.approx(math.exp(0.5), abs=1e-10)

    def test_scaled_variance(self):
        val = quadrature_expectation(lambda u: u[:, 0] ** 2, [ou_gaussian(2.5)], order=32)
        assert val == pytest.approx(2.5, abs=1e-12)

    def test_uniform_moments(self):
        val = quadrature_expectation(lambda u: u[:, 0] ** 3, [mc_unit()], order=16)
        assert val == pytest.approx(0.25, abs=1e-13)

    def test_tensor_product_of_mixed_coordinates(self):
        # E[U² V] for U ~ N(0,1), V ~ uniform: 1 · 1/2
        val = quadrature_expectation(
            lambda u: u[:, 0] ** 2 * u[:, 1], [ou_gaussian(1.0), mc_unit()], order=24
        )
        assert val == pytest.approx(0.5, abs=1e-12)

    def test_three_dimensional_cap_is_inclusive(self):
        specs = [ou_gaussian(1.0)] * 3
        val = quadrature_expectation(
            lambda u: u[:, 0] ** 2 + u[:, 1] ** 2 + u[:, 2] ** 2, specs, order=12
        )
        assert val == pytest.approx(3.0, abs=1e-10)

    def test_dimension_limit(self):
        with pytest.raises(ValueError, match="coordinates"):
            quadrature_expectation(lambda u: np.ones(u.shape[0]), [ou_gaussian(1.0)] * 4)

    def test_order_limit(self):
        with pytest.raises(ValueError, match="order"):
            quadrature_expectation(lambda u: np.ones(u.shape[0]), [ou_gaussian(1.0)], order=129)

    def test_opaque_coordinate_rejected(self):
        spec = opaque(lambda rng, n: rng.uniform(size=n))
        with pytest.raises(ValueError, match="no quadrature rule"):
            quadrature_expectation(lambda u: np.ones(u.shape[0]), [spec])

    def test_bad_integrand_shape_rejected(self):
        with pytest.raises(ValueError, match="one value per"):
            quadrature_expectation(lambda u: np.ones((u.shape[0], 2)), [mc_unit()])


class TestLawIntegrals:
    def test_polynomial_integral(self):
        assert law_integral(lambda y: 3 * y**2, 0.0, 2.0, panels=8, order=6) == pytest.approx(8.0)

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            law_integral(lambda y: y, 1.0, 1.0)

    def test_normal_mass(self):
        assert law_integral(normal_pdf, -9.0, 9.0, panels=64, order=12) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_kernel_moment_recovers_density_in_the_limit(self):
        # gaussian law with Γ = 1, A = -x/2: E[g(x - X - εA, ε)] → f(x)
        est = kernel_moment_integral(
            x=0.3,
            epsilon=1e-5,
            density=normal_pdf,
            gamma_fn=lambda y: np.ones_like(y),
            a_fn=lambda y: -0.5 * y,
            support=(-math.inf, math.inf),
        )
        assert est == pytest.approx(normal_pdf(np.array([0.3]))[0], abs=1e-6)

    def test_kernel_second_moment_scaling(self):
        # √ε·E[g²] → f(x)/√(4π γ) for the unit-Γ gaussian law
        eps = 1e-6
        m2 = kernel_moment_integral(
            x=0.0,
            epsilon=eps,
            density=normal_pdf,
            gamma_fn=lambda y: np.ones_like(y),
            a_fn=lambda y: -0.5 * y,
            support=(-math.inf, math.inf),
            power=2,
        )
        ref = normal_pdf(np.array([0.0]))[0] / math.sqrt(4 * math.pi)
        assert math.sqrt(eps) * m2 == pytest.approx(ref, rel=1e-3)
