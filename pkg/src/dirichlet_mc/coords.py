"""Base coordinates of a product error structure.

A coordinate carries a sampling law together with the three functions
that define its one-dimensional error structure: the weight γ(u) of the
square field operator, its derivative γ'(u), and the generator applied
to the identity, a(u).  Products of such coordinates are the spaces on
which all functionals in this package are differentiated.

Built-in structures:

  ou_gaussian(v)  centered Gaussian, γ(u) = v,           a(u) = -u/2
  mc_unit         uniform on [0,1],  γ(u) = u²(1-u)²,    a(u) = u(1-u)(1-2u)
  opaque          any law, γ = γ' = a = 0; the coordinate is sampled but
                  carries no derivative structure, and lifting it is an error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

# Dense Hessians make jet algebra O(m²) per operation; this cap keeps a
# full second-order jet affordable while covering desk-scale functionals.
MAX_ACTIVE_COORDS = 64

QuadRule = Callable[[int], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class CoordinateSpec:
    """One coordinate: a law plus the weight/generator functions of its structure.

    gamma, gamma_prime and gen_a accept scalars or numpy arrays.  quad_rule,
    when present, returns (nodes, weights) of a quadrature rule for
    expectations under the coordinate's law, normalised so the weights sum
    to one.
    """

    kind: str
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    gamma: Callable[[np.ndarray], np.ndarray]
    gamma_prime: Callable[[np.ndarray], np.ndarray]
    gen_a: Callable[[np.ndarray], np.ndarray]
    quad_rule: Optional[QuadRule] = None
    label: str = ""

    @property
    def is_opaque(self) -> bool:
        return self.kind == "opaque"

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.sampler(rng, 1)[0])

    def sample_n(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self.sampler(rng, n), dtype=float)


def ou_gaussian(variance: float) -> CoordinateSpec:
    """Centered Gaussian coordinate of the Ornstein-Uhlenbeck structure.

    γ(u) = variance, γ'(u) = 0, a(u) = -u/2.
    """
    if not variance > 0:
        raise ValueError("variance must be positive")
    v = float(variance)
    sd = math.sqrt(v)

    def rule(order: int) -> tuple[np.ndarray, np.ndarray]:
        x, w = np.polynomial.hermite.hermgauss(order)
        return x * math.sqrt(2.0 * v), w / math.sqrt(math.pi)

    return CoordinateSpec(
        kind="ou_gaussian",
        sampler=lambda rng, n: rng.normal(0.0, sd, size=n),
        gamma=lambda u: np.full_like(np.asarray(u, dtype=float), v),
        gamma_prime=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        gen_a=lambda u: -0.5 * np.asarray(u, dtype=float),
        quad_rule=rule,
        label=f"ou_gaussian({v:g})",
    )


def mc_unit() -> CoordinateSpec:
    """Uniform coordinate with weight γ(u) = u²(1-u)².

    The weight vanishes at both endpoints, which is what closes the
    structure on [0,1]; a(u) = γ'(u)/2 = u(1-u)(1-2u).
    """

    def rule(order: int) -> tuple[np.ndarray, np.ndarray]:
        x, w = np.polynomial.legendre.leggauss(order)
        return (x + 1.0) / 2.0, w / 2.0

    u_ = lambda u: np.asarray(u, dtype=float)
    return CoordinateSpec(
        kind="mc_unit",
        sampler=lambda rng, n: rng.uniform(0.0, 1.0, size=n),
        gamma=lambda u: (u_(u) * (1.0 - u_(u))) ** 2,
        gamma_prime=lambda u: 2.0 * u_(u) * (1.0 - u_(u)) * (1.0 - 2.0 * u_(u)),
        gen_a=lambda u: u_(u) * (1.0 - u_(u)) * (1.0 - 2.0 * u_(u)),
        quad_rule=rule,
        label="mc_unit",
    )


def opaque(sampler: Callable[[np.random.Generator, int], np.ndarray]) -> CoordinateSpec:
    """Coordinate that is sampled but carries no error structure.

    Houses the irregular inputs of a simulation (rejection steps, etc.):
    γ ≡ 0, γ' ≡ 0, a ≡ 0, and lift() refuses it.
    """
    zero = lambda u: np.zeros_like(np.asarray(u, dtype=float))
    return CoordinateSpec(
        kind="opaque", sampler=sampler, gamma=zero, gamma_prime=zero, gen_a=zero,
        label="opaque",
    )


def custom(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    gamma: Callable[[np.ndarray], np.ndarray],
    gamma_prime: Callable[[np.ndarray], np.ndarray],
    gen_a: Callable[[np.ndarray], np.ndarray],
    quad_rule: Optional[QuadRule] = None,
    label: str = "custom",
) -> CoordinateSpec:
    """User-supplied coordinate structure.  Closability is the caller's problem."""
    return CoordinateSpec(
        kind="custom", sampler=sampler, gamma=gamma, gamma_prime=gamma_prime,
        gen_a=gen_a, quad_rule=quad_rule, label=label,
    )


@dataclass(frozen=True)
class BasePoint:
    """One draw of the product coordinates: values u_1..u_m plus their specs."""

    coords: np.ndarray
    specs: tuple[CoordinateSpec, ...]

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=float))
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "specs", tuple(self.specs))
        if len(self.specs) != c.shape[0]:
            raise ValueError(
                f"{c.shape[0]} coordinate values for {len(self.specs)} specs"
            )
        if c.shape[0] > MAX_ACTIVE_COORDS:
            raise ValueError(
                f"{c.shape[0]} coordinates exceeds the cap of {MAX_ACTIVE_COORDS}"
            )

    @property
    def m(self) -> int:
        return self.coords.shape[0]

    def gamma_values(self) -> np.ndarray:
        """γ_i(u_i) per coordinate."""
        return np.array([float(s.gamma(u)) for s, u in zip(self.specs, self.coords)])

    def gamma_prime_values(self) -> np.ndarray:
        return np.array(
            [float(s.gamma_prime(u)) for s, u in zip(self.specs, self.coords)]
        )

    def gen_a_values(self) -> np.ndarray:
        return np.array([float(s.gen_a(u)) for s, u in zip(self.specs, self.coords)])


def sample_base(
    specs: Sequence[CoordinateSpec], rng: np.random.Generator
) -> BasePoint:
    """Independent draw of every coordinate from its own law."""
    specs = tuple(specs)
    values = np.array([s.sample(rng) for s in specs])
    return BasePoint(values, specs)
