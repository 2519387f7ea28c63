"""Built-in scenarios: named laws with simulatable (X, Γ, A, Γ[X,Γ[X]]).

Each scenario knows how to build a batch from a seeded chunk stream, and
optionally carries an exact density, the deterministic reduced forms
γ(x), a(x) used by the kernel sweeps, and a conditional-expectation
oracle.  Builders are vectorised closed forms of the jet calculus; the
test suite re-derives them through jets on subsamples, so the fast path
cannot drift from the operators silently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .coords import CoordinateSpec, mc_unit, ou_gaussian
from .estimators import QuadBatch, TripleBatch
from .poisson import poisson_mc_unit, sample_poisson_arrays
from .quadrature import law_integral, normal_pdf, quadrature_expectation
from .streams import sample_chunked
from .wiener import (
    additive_coefficients,
    gbm_coefficients,
    simulate_triple_batch,
    zero_noise_coefficients,
)

Density = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Scenario:
    """A named law together with everything the harness can know about it."""

    name: str
    description: str
    kind: str  # "quad" or "triple"
    build: Callable[[int, int, int], QuadBatch | TripleBatch]
    exact_density: Optional[Density] = None
    support: tuple[float, float] = (-math.inf, math.inf)
    mass_bounds: Optional[tuple[float, float]] = None
    gamma_of_x: Optional[Density] = None
    a_of_x: Optional[Density] = None
    oracle_specs: tuple[CoordinateSpec, ...] = ()
    cond_oracle: Optional[Callable[[float], float]] = None
    default_points: tuple[float, ...] = (0.0,)

    @property
    def oracle_dim(self) -> int:
        return len(self.oracle_specs)

    @property
    def has_reduced_form(self) -> bool:
        return self.gamma_of_x is not None and self.a_of_x is not None

    def check_mass(self, tol: float = 1e-4) -> float:
        """Exact densities must integrate to one over their support."""
        if self.exact_density is None:
            raise ValueError(f"scenario {self.name} has no exact density")
        lo, hi = self.mass_bounds if self.mass_bounds else self.support
        mass = law_integral(self.exact_density, lo, hi, panels=512, order=12)
        if abs(mass - 1.0) > tol:
            raise ValueError(f"exact density of {self.name} integrates to {mass:.6f}")
        return mass


# -- builders ---------------------------------------------------------------

def _build_gaussian(n: int, seed: int, workers: int) -> QuadBatch:
    (g,) = sample_chunked(n, seed, lambda rng, k: rng.normal(size=k), workers)
    return QuadBatch.from_raw(g, np.ones(n), -0.5 * g, np.zeros(n))


def _build_lognormal(n: int, seed: int, workers: int) -> QuadBatch:
    (g,) = sample_chunked(n, seed, lambda rng, k: rng.normal(size=k), workers)
    x = np.exp(g)
    # X = e^u: Γ = X², A = X(1-u)/2, Γ[X,Γ[X]] = 2X³
    return QuadBatch.from_raw(x, x * x, 0.5 * x * (1.0 - g), 2.0 * x**3)


def _build_gaussian_pair(n: int, seed: int, workers: int) -> QuadBatch:
    def draw(rng, k):
        z = rng.normal(size=(k, 2))
        return z[:, 0], z[:, 1]

    g1, g2 = sample_chunked(n, seed, draw, workers)
    c, s = np.cos(g2), np.sin(g2)
    x = g1 + s
    gam = 1.0 + c * c
    a = -0.5 * g1 - 0.5 * g2 * c - 0.5 * s
    # Γ-field = 1 + cos²(u₂): ∂₂Γ = -sin(2u₂), so Γ[X,Γ[X]] = cos(u₂)·(-sin 2u₂)
    gxx = -c * np.sin(2.0 * g2)
    return QuadBatch.from_raw(x, gam, a, gxx, g=s, gamma_x_g=c * c)


def _build_triangular(n: int, seed: int, workers: int) -> QuadBatch:
    def draw(rng, k):
        u = rng.uniform(size=(k, 2))
        return u[:, 0], u[:, 1]

    u0, u1 = sample_chunked(n, seed, draw, workers)
    u = np.stack([u0, u1], axis=1)
    gam_i = (u * (1.0 - u)) ** 2
    a_i = u * (1.0 - u) * (1.0 - 2.0 * u)
    gp_i = 2.0 * a_i
    return QuadBatch.from_raw(
        u.sum(axis=1), gam_i.sum(axis=1), a_i.sum(axis=1), (gp_i * gam_i).sum(axis=1)
    )


_GBM_VOL, _GBM_DRIFT, _GBM_T, _GBM_X0 = 0.3, 0.05, 1.0, 1.0
_GBM_STEPS = 16


def _gbm_exact_from_bt(bt: np.ndarray):
    vol, drift, T, x0 = _GBM_VOL, _GBM_DRIFT, _GBM_T, _GBM_X0
    x = x0 * np.exp((drift - 0.5 * vol**2) * T + vol * bt)
    gam = vol**2 * x**2 * T
    a = -0.5 * vol * x * bt + 0.5 * vol**2 * x * T
    gxx = 2.0 * T**2 * vol**4 * x**3
    return x, gam, a, gxx


def _build_gbm_exact(n: int, seed: int, workers: int) -> QuadBatch:
    (bt,) = sample_chunked(
        n, seed, lambda rng, k: rng.normal(0.0, math.sqrt(_GBM_T), size=k), workers
    )
    return QuadBatch.from_raw(*_gbm_exact_from_bt(bt))


def _euler_builder(coeffs):
    def build(n: int, seed: int, workers: int) -> TripleBatch:
        def draw(rng, k):
            return simulate_triple_batch(_GBM_X0, _GBM_T, _GBM_STEPS, coeffs, k, rng)[:3]

        x, g, a = sample_chunked(n, seed, draw, workers)
        return TripleBatch.from_raw(x, g, a)

    return build


_build_gbm_euler = _euler_builder(gbm_coefficients(_GBM_VOL, _GBM_DRIFT))
_build_zero_noise = _euler_builder(zero_noise_coefficients())
_build_additive_euler = _euler_builder(additive_coefficients())


_POISSON_LAMBDA = 3.0


def _build_poisson(n: int, seed: int, workers: int) -> QuadBatch:
    spec = poisson_mc_unit(_POISSON_LAMBDA)

    def draw(rng, k):
        x, g, a, q, _ = sample_poisson_arrays(spec, rng, k)
        return x, g, a, q

    x, g, a, q = sample_chunked(n, seed, draw, workers)
    return QuadBatch.from_raw(x, g, a, q)


# -- densities and oracles ---------------------------------------------------

def _gaussian_density(x):
    return normal_pdf(np.asarray(x, dtype=float))


def _lognormal_density(x, mu: float = 0.0, sigma: float = 1.0):
    x = np.asarray(x, dtype=float)
    safe = np.maximum(x, 1e-300)
    val = np.exp(-0.5 * ((np.log(safe) - mu) / sigma) ** 2) / (
        safe * sigma * math.sqrt(2.0 * math.pi)
    )
    return np.where(x > 0, val, 0.0)


def _triangular_density(x):
    x = np.asarray(x, dtype=float)
    return np.where((x >= 0) & (x <= 1), x, np.where((x > 1) & (x <= 2), 2.0 - x, 0.0))


_PAIR_SPECS = (ou_gaussian(1.0),)


@lru_cache(maxsize=4096)
def _pair_density_scalar(x: float) -> float:
    return quadrature_expectation(
        lambda u: normal_pdf(x - np.sin(u[:, 0])), _PAIR_SPECS, order=96
    )


def _pair_density(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([_pair_density_scalar(float(v)) for v in x])


@lru_cache(maxsize=4096)
def pair_conditional_oracle(x: float) -> float:
    """E[sin(U₂) | U₁ + sin(U₂) = x] for independent standard Gaussians.

    The first coordinate is Gaussian given the second, so its density
    enters in closed form and the remaining expectation is a Hermite rule
    over the second coordinate."""
    num = quadrature_expectation(
        lambda u: np.sin(u[:, 0]) * normal_pdf(x - np.sin(u[:, 0])), _PAIR_SPECS, order=96
    )
    return num / _pair_density_scalar(x)


def _lognormal_gamma(x):
    return np.asarray(x, dtype=float) ** 2


def _lognormal_a(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * x * (1.0 - np.log(np.maximum(x, 1e-300)))


def _gbm_exact_gamma(x):
    return _GBM_VOL**2 * np.asarray(x, dtype=float) ** 2 * _GBM_T


def _gbm_exact_a(x):
    vol, drift, T, x0 = _GBM_VOL, _GBM_DRIFT, _GBM_T, _GBM_X0
    x = np.asarray(x, dtype=float)
    bt = (np.log(np.maximum(x, 1e-300) / x0) - (drift - 0.5 * vol**2) * T) / vol
    return -0.5 * vol * x * bt + 0.5 * vol**2 * x * T


_GBM_MU = math.log(_GBM_X0) + (_GBM_DRIFT - 0.5 * _GBM_VOL**2) * _GBM_T
_GBM_SIG = _GBM_VOL * math.sqrt(_GBM_T)


# -- registry ----------------------------------------------------------------

SCENARIOS: dict[str, Scenario] = {}


def _register(s: Scenario) -> Scenario:
    SCENARIOS[s.name] = s
    return s


_register(Scenario(
    name="gaussian",
    description="X = U for one standard Gaussian coordinate; Γ = 1, A = -U/2",
    kind="quad",
    build=_build_gaussian,
    exact_density=_gaussian_density,
    mass_bounds=(-10.0, 10.0),
    gamma_of_x=lambda x: np.ones_like(np.asarray(x, dtype=float)),
    a_of_x=lambda x: -0.5 * np.asarray(x, dtype=float),
    oracle_specs=(ou_gaussian(1.0),),
    default_points=(-1.0, 0.0, 1.0),
))

_register(Scenario(
    name="lognormal",
    description="X = exp(U) for one standard Gaussian coordinate",
    kind="quad",
    build=_build_lognormal,
    exact_density=_lognormal_density,
    support=(0.0, math.inf),
    mass_bounds=(1e-9, 80.0),
    gamma_of_x=_lognormal_gamma,
    a_of_x=_lognormal_a,
    oracle_specs=(ou_gaussian(1.0),),
    default_points=(0.5, 1.0, 2.0),
))

_register(Scenario(
    name="gaussian_pair",
    description="X = U₁ + sin(U₂) with tracked G = sin(U₂); nondegenerate (Γ, A) given X",
    kind="quad",
    build=_build_gaussian_pair,
    exact_density=_pair_density,
    mass_bounds=(-12.0, 12.0),
    oracle_specs=(ou_gaussian(1.0), ou_gaussian(1.0)),
    cond_oracle=pair_conditional_oracle,
    default_points=(-0.5, 0.0, 0.5),
))

_register(Scenario(
    name="triangular",
    description="X = U₀ + U₁ on the unit-square structure; Γ degenerates at the corners",
    kind="quad",
    build=_build_triangular,
    exact_density=_triangular_density,
    support=(0.0, 2.0),
    oracle_specs=(mc_unit(), mc_unit()),
    default_points=(0.5, 1.0, 1.5),
))

_register(Scenario(
    name="gbm_exact",
    description="terminal value of geometric Brownian motion built in closed form",
    kind="quad",
    build=_build_gbm_exact,
    exact_density=lambda x: _lognormal_density(x, _GBM_MU, _GBM_SIG),
    support=(0.0, math.inf),
    mass_bounds=(1e-9, 30.0),
    gamma_of_x=_gbm_exact_gamma,
    a_of_x=_gbm_exact_a,
    oracle_specs=(ou_gaussian(_GBM_T),),
    default_points=(0.8, 1.0, 1.3),
))

_register(Scenario(
    name="gbm_euler",
    description=f"extended Euler triple of the same GBM at n = {_GBM_STEPS} steps; "
    "its law differs from the exact one at O(1/n), so no exact density is attached",
    kind="triple",
    build=_build_gbm_euler,
    support=(0.0, math.inf),
    default_points=(0.8, 1.0, 1.3),
))

_register(Scenario(
    name="additive_euler",
    description="extended Euler triple with state-independent noise and linear drift",
    kind="triple",
    build=_build_additive_euler,
    default_points=(0.8, 1.1, 1.4),
))

_register(Scenario(
    name="zero_noise",
    description="σ = 0 degenerate case: X deterministic, Γ = A = 0",
    kind="triple",
    build=_build_zero_noise,
    default_points=(math.e,),
))

_register(Scenario(
    name="poisson_mc_unit",
    description=f"X = N(identity) for a Poisson process of mean {_POISSON_LAMBDA:g} uniform "
    "points; the empty configuration is an atom, so density formulas are out of scope",
    kind="quad",
    build=_build_poisson,
    support=(0.0, math.inf),
    default_points=(1.0, 1.5, 2.0),
))


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        known = ", ".join(sorted(SCENARIOS))
        raise KeyError(f"unknown scenario {name!r}; known scenarios: {known}") from None


def corrupt_quad_batch(b: QuadBatch, a_shift: float) -> QuadBatch:
    """Shift A by a constant: the negative control that breaks centering."""
    return QuadBatch(
        b.x, b.gamma, b.a + a_shift, b.gamma_x_gammax, b.g, b.gamma_x_g,
        invalid_count=b.invalid_count,
    )
