"""Extended Euler scheme carrying (X, Γ[X], A[X]) along a scalar SDE.

For dX = σ(X,t) dB + r(X,t) dt under the Ornstein-Uhlenbeck structure,
the triple Y = (X, Γ[X], A[X]) is itself a diffusion.  One Euler step of
mesh h with Brownian increment db updates, with all coefficients at (X, t):

    X⁺ = X + σ db + r h
    Γ⁺ = (1 + σ'_x db + r'_x h)² Γ + σ² h
    A⁺ = A + [-σ/2 + σ''_xx Γ/2 + σ'_x A] db + [r''_xx Γ/2 + r'_x A] h

The Γ update keeps the exact square of the one-step derivative
(1 + σ' db + r' h) rather than its expansion 1 + 2σ' db + (2r' + σ'²) h;
the two agree in mean to O(h²), but only the exact square commutes
pathwise with the functional calculus applied to the scheme, which is
what jet_oracle_triple verifies to roundoff.  It also keeps Γ ≥ 0 on
every path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coords import ou_gaussian
from .jets import Jet2, jet_const, lift
from .operators import ErrorTriple, a_of, gamma_of
from .coords import BasePoint, MAX_ACTIVE_COORDS

CoefFn = Callable[[float, float], float]

_FD_STEP = 1e-5
_FD_TOL = 1e-5


def _check_derivative(f: CoefFn, df: CoefFn, name: str, order: int,
                      xs: np.ndarray, ts: np.ndarray) -> None:
    """Central finite differences of f against the stated derivative df."""
    for x, t in zip(xs, ts):
        if order == 1:
            fd = (f(x + _FD_STEP, t) - f(x - _FD_STEP, t)) / (2.0 * _FD_STEP)
        else:
            fd = (f(x + _FD_STEP, t) - 2.0 * f(x, t) + f(x - _FD_STEP, t)) / _FD_STEP**2
        stated = df(x, t)
        if abs(fd - stated) > _FD_TOL * max(1.0, abs(stated), abs(fd)):
            raise ValueError(
                f"{name} disagrees with finite differences at x={x:g}, t={t:g}: "
                f"stated {stated:.6g}, measured {fd:.6g}"
            )


@dataclass(frozen=True)
class SdeCoefficients:
    """σ, r and their first two x-derivatives, as functions of (x, t).

    The stated derivatives are probed against central finite differences
    at construction; a mismatch is a hard error since a wrong derivative
    silently corrupts Γ and A.
    """

    sigma: CoefFn
    sigma_x: CoefFn
    sigma_xx: CoefFn
    r: CoefFn
    r_x: CoefFn
    r_xx: CoefFn
    name: str = ""
    probe_xs: tuple[float, ...] = (0.2, 0.5, 0.8, 1.0, 1.3, 1.7, 2.0, 2.5, 3.0, 4.0)

    def __post_init__(self):
        xs = np.asarray(self.probe_xs, dtype=float)
        ts = np.linspace(0.0, 1.0, xs.size)
        _check_derivative(self.sigma, self.sigma_x, "sigma_x", 1, xs, ts)
        _check_derivative(self.sigma, self.sigma_xx, "sigma_xx", 2, xs, ts)
        _check_derivative(self.r, self.r_x, "r_x", 1, xs, ts)
        _check_derivative(self.r, self.r_xx, "r_xx", 2, xs, ts)


@dataclass(frozen=True)
class EulerState:
    """State of the extended scheme after `step` steps."""

    x: float
    gamma: float
    a: float
    t: float
    step: int
    flagged: bool = False

    def __post_init__(self):
        if not self.flagged and math.isfinite(self.gamma) and self.gamma < 0.0:
            raise ValueError(
                f"negative square field {self.gamma:g} at step {self.step}; "
                "this indicates inconsistent coefficients"
            )


def euler_triple_step(s: EulerState, db: float, h: float, c: SdeCoefficients) -> EulerState:
    """One extended Euler step of mesh h with Brownian increment db."""
    if not h > 0:
        raise ValueError("step size must be positive")
    x, g, a, t = s.x, s.gamma, s.a, s.t
    sig = c.sigma(x, t)
    sig1 = c.sigma_x(x, t)
    sig2 = c.sigma_xx(x, t)
    r1 = c.r_x(x, t)
    r2 = c.r_xx(x, t)

    x_new = x + sig * db + c.r(x, t) * h
    lin = 1.0 + sig1 * db + r1 * h
    g_new = lin * lin * g + sig * sig * h
    a_new = a + (-0.5 * sig + 0.5 * sig2 * g + sig1 * a) * db + (0.5 * r2 * g + r1 * a) * h

    vals = (x_new, g_new, a_new)
    if not all(math.isfinite(v) for v in vals):
        return EulerState(x_new, g_new, a_new, t + h, s.step + 1, flagged=True)
    return EulerState(x_new, g_new, a_new, t + h, s.step + 1)


def simulate_triple(
    x0: float,
    T: float,
    n: int,
    c: SdeCoefficients,
    rng: np.random.Generator,
) -> tuple[Optional[ErrorTriple], np.ndarray]:
    """Run n steps of mesh T/n from (x0, 0, 0); db_k ~ N(0, T/n).

    Returns the terminal scalar triple and the increments used, so an
    oracle can replay the same path.  A flagged (non-finite) state yields
    triple None with the increments still reported.
    """
    if n < 1:
        raise ValueError("need at least one step")
    if not T > 0:
        raise ValueError("horizon must be positive")
    h = T / n
    increments = rng.normal(0.0, math.sqrt(h), size=n)
    state = EulerState(x0, 0.0, 0.0, 0.0, 0)
    for k in range(n):
        state = euler_triple_step(state, float(increments[k]), h, c)
        if state.flagged:
            return None, increments
    triple = ErrorTriple(
        np.array([state.x]), np.array([[state.gamma]]), np.array([state.a])
    )
    return triple, increments


def jet_oracle_triple(
    x0: float, T: float, n: int, c: SdeCoefficients, increments: np.ndarray
) -> ErrorTriple:
    """Triple computed purely by functional calculus on the discrete scheme.

    The terminal value X_T of the Euler recursion is built as a jet over n
    Gaussian coordinates of variance h (γ_k = h, a_k(u) = -u/2), and Γ, A
    are read off the jet.  Agreement with simulate_triple on the same
    increments is the commutation check for the extended scheme.
    """
    increments = np.asarray(increments, dtype=float)
    if increments.shape[0] != n:
        raise ValueError(f"expected {n} increments, got {increments.shape[0]}")
    if n > MAX_ACTIVE_COORDS:
        raise ValueError(f"n={n} exceeds the jet coordinate cap of {MAX_ACTIVE_COORDS}")
    h = T / n
    spec = ou_gaussian(h)
    base = BasePoint(increments, (spec,) * n)
    x = jet_const(x0, n)
    t = 0.0
    for k in range(n):
        db = lift(base, k + 1)
        sig = _coef_jet(c.sigma, c.sigma_x, c.sigma_xx, x, t)
        drift = _coef_jet(c.r, c.r_x, c.r_xx, x, t)
        x = x + sig * db + drift * h
        t += h
    g = gamma_of(x, x, base)
    return ErrorTriple(np.array([x.value]), np.array([[g]]), np.array([a_of(x, base)]))


def _coef_jet(f: CoefFn, fx: CoefFn, fxx: CoefFn, jx: Jet2, t: float) -> Jet2:
    """Chain a coefficient function (and its x-derivatives) through a jet."""
    v = jx.value
    p, p1, p2 = f(v, t), fx(v, t), fxx(v, t)
    return Jet2(p, p1 * jx.grad, p2 * np.outer(jx.grad, jx.grad) + p1 * jx.hess)


def simulate_triple_batch(
    x0: float,
    T: float,
    n: int,
    c: SdeCoefficients,
    n_paths: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised extended Euler over many paths.

    Returns (x, gamma, a, finite_mask) arrays of length n_paths.  The k-th
    increment of every path is drawn in one batch, so path j here follows
    a different increment stream than j calls of simulate_triple.
    """
    h = T / n
    sqh = math.sqrt(h)
    x = np.full(n_paths, float(x0))
    g = np.zeros(n_paths)
    a = np.zeros(n_paths)
    t = 0.0
    for _ in range(n):
        db = rng.normal(0.0, sqh, size=n_paths)
        sig = c.sigma(x, t)
        sig1 = c.sigma_x(x, t)
        sig2 = c.sigma_xx(x, t)
        r0 = c.r(x, t)
        r1 = c.r_x(x, t)
        r2 = c.r_xx(x, t)
        lin = 1.0 + sig1 * db + r1 * h
        x, g, a = (
            x + sig * db + r0 * h,
            lin * lin * g + sig * sig * h,
            a + (-0.5 * sig + 0.5 * sig2 * g + sig1 * a) * db + (0.5 * r2 * g + r1 * a) * h,
        )
        t += h
    finite = np.isfinite(x) & np.isfinite(g) & np.isfinite(a)
    return x, g, a, finite


# -- named coefficient sets ----------------------------------------------

def _const(v: float) -> CoefFn:
    return lambda x, t: v * np.ones_like(x) if isinstance(x, np.ndarray) else v


def _linear(slope: float) -> CoefFn:
    return lambda x, t: slope * x


def gbm_coefficients(vol: float = 0.3, drift: float = 0.05) -> SdeCoefficients:
    """Geometric Brownian motion: σ(x) = vol·x, r(x) = drift·x."""
    return SdeCoefficients(
        sigma=_linear(vol), sigma_x=_const(vol), sigma_xx=_const(0.0),
        r=_linear(drift), r_x=_const(drift), r_xx=_const(0.0),
        name=f"gbm(vol={vol:g},drift={drift:g})",
    )


def additive_coefficients(vol: float = 0.4, drift: float = 0.1) -> SdeCoefficients:
    """State-independent noise with linear drift: σ = vol, r(x) = drift·x."""
    return SdeCoefficients(
        sigma=_const(vol), sigma_x=_const(0.0), sigma_xx=_const(0.0),
        r=_linear(drift), r_x=_const(drift), r_xx=_const(0.0),
        name=f"additive(vol={vol:g},drift={drift:g})",
    )


def zero_noise_coefficients(drift: float = 1.0) -> SdeCoefficients:
    """σ = 0: the scheme degenerates to a deterministic Euler ODE with Γ = A = 0."""
    return SdeCoefficients(
        sigma=_const(0.0), sigma_x=_const(0.0), sigma_xx=_const(0.0),
        r=_linear(drift), r_x=_const(drift), r_xx=_const(0.0),
        name=f"zero_noise(drift={drift:g})",
    )


COEFFICIENT_SETS: dict[str, Callable[[], SdeCoefficients]] = {
    "gbm": gbm_coefficients,
    "additive": additive_coefficients,
    "zero_noise": zero_noise_coefficients,
}
