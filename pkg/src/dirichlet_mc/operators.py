"""Square field, generator and third-object assembly over a product structure.

For a functional X with jet (value, g, H) at a base point u with
per-coordinate weights γ_i, derivatives γ'_i and generator actions a_i:

    Γ[X, Y] = Σ_i gx_i gy_i γ_i(u_i)
    A[X]    = Σ_i [ gx_i a_i(u_i) + ½ H_ii γ_i(u_i) ]
    ∂_j Γ[X] = Σ_i 2 gx_i H_ij γ_i(u_i) + gx_j² γ'_j(u_j)
    Γ[X, Γ[X]] = Σ_j gx_j (∂_j Γ[X]) γ_j(u_j)

Only the Hessian diagonal enters A (the product structure has no cross
weights), but off-diagonals are kept because ∂_j Γ[X] needs them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coords import BasePoint
from .jets import Jet2

# Eigenvalue slack accepted as numerical PSD, relative to max(1, trace).
PSD_SLACK = 1e-12


@dataclass(frozen=True)
class ErrorTriple:
    """(X, Γ[X] matrix, A[X] vector) for an ℝ^d-valued functional."""

    x: np.ndarray
    gamma: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        g = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "a", a)
        d = x.shape[0]
        if g.shape != (d, d) or a.shape != (d,):
            raise ValueError(f"inconsistent shapes: x {x.shape}, gamma {g.shape}, a {a.shape}")

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.x).all()
            and np.isfinite(self.gamma).all()
            and np.isfinite(self.a).all()
        )

    def check_psd(self) -> None:
        """Reject gamma matrices that are non-symmetric or clearly not PSD."""
        g = self.gamma
        if not np.allclose(g, g.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(g).max()))):
            raise ValueError("gamma matrix is not symmetric")
        eig = np.linalg.eigvalsh(0.5 * (g + g.T))
        floor = -PSD_SLACK * max(1.0, float(np.trace(g)))
        if eig.min() < floor:
            raise ValueError(f"gamma matrix has eigenvalue {eig.min():.3e} below {floor:.3e}")


@dataclass(frozen=True)
class ErrorQuad:
    """Scalar triple extended with Γ[X, Γ[X]], plus optional data for a
    second tracked scalar G (its value and Γ[X, G])."""

    triple: ErrorTriple
    gamma_x_gammax: float
    aux: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.triple.d != 1:
            raise ValueError("ErrorQuad requires a scalar (d=1) triple")
        g = float(self.triple.gamma[0, 0])
        if np.isfinite(g) and g < -PSD_SLACK * max(1.0, abs(g)):
            raise ValueError(f"square field entry {g:g} is negative")
        object.__setattr__(self, "gamma_x_gammax", float(self.gamma_x_gammax))

    @property
    def x(self) -> float:
        return float(self.triple.x[0])

    @property
    def gamma(self) -> float:
        return float(self.triple.gamma[0, 0])

    @property
    def a(self) -> float:
        return float(self.triple.a[0])


def _weights(base: BasePoint) -> np.ndarray:
    return base.gamma_values()


def gamma_of(jx: Jet2, jy: Jet2, base: BasePoint) -> float:
    """Square field Γ[X, Y] = Σ_i gx_i gy_i γ_i(u_i); symmetric, Γ[X, X] ≥ 0."""
    if jx.m != base.m or jy.m != base.m:
        raise ValueError("jets were not built over this base point")
    return float(np.sum(jx.grad * jy.grad * _weights(base)))


def a_of(jx: Jet2, base: BasePoint) -> float:
    """Generator A[X] = Σ_i [ gx_i a_i(u_i) + ½ H_ii γ_i(u_i) ]."""
    if jx.m != base.m:
        raise ValueError("jet was not built over this base point")
    return float(
        np.sum(jx.grad * base.gen_a_values())
        + 0.5 * np.sum(np.diag(jx.hess) * _weights(base))
    )


def gamma_grad(jx: Jet2, base: BasePoint) -> np.ndarray:
    """Coordinate gradient of the Γ[X] field:
    ∂_j Γ[X] = Σ_i 2 gx_i H_ij γ_i + gx_j² γ'_j."""
    if jx.m != base.m:
        raise ValueError("jet was not built over this base point")
    w = _weights(base)
    return 2.0 * (jx.hess @ (jx.grad * w)) + jx.grad**2 * base.gamma_prime_values()


def triple_of(jx: Jet2, base: BasePoint) -> ErrorTriple:
    """Scalar ErrorTriple (X, Γ[X], A[X]) read off a jet."""
    g = gamma_of(jx, jx, base)
    return ErrorTriple(np.array([jx.value]), np.array([[g]]), np.array([a_of(jx, base)]))


def quad_of(jx: Jet2, base: BasePoint, jg: Optional[Jet2] = None) -> ErrorQuad:
    """ErrorQuad with Γ[X, Γ[X]] = Σ_j gx_j (∂_j Γ[X]) γ_j, and, when a
    second jet G is supplied, (G, Γ[X, G]) for conditional expectations."""
    trip = triple_of(jx, base)
    gxx = float(np.sum(jx.grad * gamma_grad(jx, base) * _weights(base)))
    aux = None
    if jg is not None:
        aux = (float(jg.value), gamma_of(jx, jg, base))
    return ErrorQuad(trip, gxx, aux)
