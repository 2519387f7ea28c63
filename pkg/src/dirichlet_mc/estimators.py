"""Density estimators driven by (X, Γ[X], A[X]) samples.

Two families:

* kernel estimators  f̂(x) = N⁻¹ Σ g(x - X_n - ε A_n, ε Γ_n), where g(·, Σ)
  is the centered Gaussian density.  The A-shift together with the
  Γ-shaped covariance pushes the bias from O(ε) down to O(ε²); the
  baselines without the shift (identity or Γ covariance) are kept for
  comparison.

* sign formulas      f(x) = ½ E[sign(x - X) W], with the weight
  W = Γ[X, 1/Γ[X]] + 2 A[X]/Γ[X] and Γ[X, 1/Γ[X]] = -Γ[X, Γ[X]]/Γ[X]².
  These converge at the plain law-of-large-numbers rate.  The
  ε-regularised variant replaces Γ by ε + Γ and increases monotonically
  to a lower semicontinuous version of the density as ε decreases.  W is
  centered, which both drives the far-tail behaviour and enables a
  split-sample control variate.

Reductions are plain numpy sums over arrays assembled in canonical chunk
order, so every estimate is bit-reproducible for any worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

DEGENERATE_DET = 1e-30
RIDGE_SCALE = 1e-8


class DegenerateCovarianceError(ValueError):
    """Kernel covariance is numerically singular and the policy is to skip."""


class NoUsableSamplesError(ValueError):
    """Every sample of a batch was excluded (degenerate or invalid)."""


@dataclass(frozen=True)
class TripleBatch:
    """Independent (X, Γ, A) draws sharing a dimension d.

    x: (N, d); gamma: (N, d, d); a: (N, d).  Non-finite draws are excluded
    before construction and only their count is kept.
    """

    x: np.ndarray
    gamma: np.ndarray
    a: np.ndarray
    invalid_count: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim == 1:
            g = g[:, None, None]
        a = np.asarray(self.a, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        n, d = x.shape
        if g.shape != (n, d, d) or a.shape != (n, d):
            raise ValueError("batch arrays disagree on N or d")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_raw(cls, x, gamma, a) -> "TripleBatch":
        """Build a batch, silently dropping (but counting) non-finite rows."""
        x = np.asarray(x, dtype=float)
        gamma = np.asarray(gamma, dtype=float)
        a = np.asarray(a, dtype=float)
        ok = (
            np.isfinite(x).reshape(x.shape[0], -1).all(axis=1)
            & np.isfinite(gamma).reshape(gamma.shape[0], -1).all(axis=1)
            & np.isfinite(a).reshape(a.shape[0], -1).all(axis=1)
        )
        bad = int((~ok).sum())
        return cls(x[ok], gamma[ok], a[ok], invalid_count=bad)


@dataclass(frozen=True)
class QuadBatch:
    """Scalar quads (X, Γ, A, Γ[X, Γ[X]]), optionally with a second scalar
    G and Γ[X, G] for conditional expectations."""

    x: np.ndarray
    gamma: np.ndarray
    a: np.ndarray
    gamma_x_gammax: np.ndarray
    g: Optional[np.ndarray] = None
    gamma_x_g: Optional[np.ndarray] = None
    invalid_count: int = 0

    def __post_init__(self):
        arrays = {
            "x": self.x, "gamma": self.gamma, "a": self.a,
            "gamma_x_gammax": self.gamma_x_gammax,
        }
        n = None
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=float)
            object.__setattr__(self, name, arr)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            n = arr.shape[0] if n is None else n
            if arr.shape[0] != n:
                raise ValueError("quad arrays disagree on N")
        for name in ("g", "gamma_x_g"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                object.__setattr__(self, name, arr)
                if arr.shape != (n,):
                    raise ValueError(f"{name} has wrong shape")
        if (self.g is None) != (self.gamma_x_g is None):
            raise ValueError("g and gamma_x_g must be supplied together")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def has_aux(self) -> bool:
        return self.g is not None

    @classmethod
    def from_raw(cls, x, gamma, a, gamma_x_gammax, g=None, gamma_x_g=None) -> "QuadBatch":
        cols = [np.asarray(c, dtype=float) for c in (x, gamma, a, gamma_x_gammax)]
        aux = [np.asarray(c, dtype=float) for c in (g, gamma_x_g) if c is not None]
        ok = np.ones(cols[0].shape[0], dtype=bool)
        for c in cols + aux:
            ok &= np.isfinite(c)
        bad = int((~ok).sum())
        kept = [c[ok] for c in cols]
        kept_aux = [c[ok] for c in aux] if aux else [None, None]
        return cls(*kept, *kept_aux, invalid_count=bad)

    def triple_batch(self) -> TripleBatch:
        return TripleBatch(self.x, self.gamma, self.a, invalid_count=self.invalid_count)

    def halves(self) -> tuple["QuadBatch", "QuadBatch"]:
        """First-half / second-half split in canonical sample order."""
        if self.n < 2:
            raise ValueError("batch too small to split")
        m = self.n // 2
        def cut(arr, lo, hi):
            return None if arr is None else arr[lo:hi]
        return (
            QuadBatch(self.x[:m], self.gamma[:m], self.a[:m], self.gamma_x_gammax[:m],
                      cut(self.g, 0, m), cut(self.gamma_x_g, 0, m)),
            QuadBatch(self.x[m:], self.gamma[m:], self.a[m:], self.gamma_x_gammax[m:],
                      cut(self.g, m, self.n), cut(self.gamma_x_g, m, self.n)),
        )


@dataclass(frozen=True)
class DensityEstimate:
    """Point estimate of a density (or a signed numerator) at one query x."""

    x: float | np.ndarray
    value: float
    std_error: float
    n_used: int
    epsilon: Optional[float] = None


@dataclass(frozen=True)
class ConditionalEstimate:
    """Ratio estimate f(x)E[G|X=x] / f(x) with delta-method error bars."""

    x: float
    numerator: DensityEstimate
    denominator: DensityEstimate
    ratio: float
    ratio_std_error: float
    reliable: bool


# -- Gaussian kernel -------------------------------------------------------

def gaussian_kernel(y, cov, ridge: bool = False) -> float:
    """Centered Gaussian density (2π)^{-d/2} det(Σ)^{-1/2} exp(-½ yᵀΣ⁻¹y).

    A covariance with det below 1e-30 is degenerate: by default that is an
    error for the caller to count and skip; with ridge=True, δ·I with
    δ = 1e-8·trace is added instead.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = y.shape[0]
    if cov.shape != (d, d):
        raise ValueError(f"covariance shape {cov.shape} does not match y of length {d}")
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(cov).max()))):
        raise ValueError("covariance must be symmetric")
    eig = np.linalg.eigvalsh(cov)
    if eig.min() < -1e-12 * max(1.0, float(np.trace(cov))):
        raise ValueError("covariance is not positive semidefinite")
    det = float(np.linalg.det(cov))
    if det < DEGENERATE_DET:
        if not ridge:
            raise DegenerateCovarianceError(
                f"covariance determinant {det:.3e} below {DEGENERATE_DET:g}"
            )
        cov = cov + RIDGE_SCALE * max(float(np.trace(cov)), DEGENERATE_DET) * np.eye(d)
        det = float(np.linalg.det(cov))
    quad = float(y @ np.linalg.solve(cov, y))
    return (2.0 * math.pi) ** (-d / 2.0) * det**-0.5 * math.exp(-0.5 * quad)


def _kernel_values_1d(y: np.ndarray, var: np.ndarray, ridge: bool) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised d=1 kernel with the degenerate policy applied per sample.

    Returns (values, usable_mask); skipped entries hold 0 in values.
    """
    var = np.asarray(var, dtype=float)
    usable = np.isfinite(var) & np.isfinite(y)
    if ridge:
        var = np.where(var < DEGENERATE_DET, var + RIDGE_SCALE * np.maximum(var, DEGENERATE_DET), var)
        var = np.maximum(var, DEGENERATE_DET)
    else:
        usable = usable & (var >= DEGENERATE_DET)
    safe = np.where(usable, var, 1.0)
    vals = np.exp(-0.5 * y * y / safe) / np.sqrt(2.0 * math.pi * safe)
    return np.where(usable, vals, 0.0), usable


def _kernel_values_nd(y: np.ndarray, cov: np.ndarray, ridge: bool) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised kernel for (N, d) offsets against (N, d, d) covariances."""
    n, d = y.shape
    det = np.linalg.det(cov)
    usable = np.isfinite(det) & np.isfinite(y).all(axis=1)
    if ridge:
        tr = np.einsum("nii->n", cov)
        bump = np.where(det < DEGENERATE_DET, RIDGE_SCALE * np.maximum(tr, DEGENERATE_DET), 0.0)
        cov = cov + bump[:, None, None] * np.eye(d)[None, :, :]
        det = np.linalg.det(cov)
    else:
        usable = usable & (det >= DEGENERATE_DET)
    safe_cov = np.where(usable[:, None, None], cov, np.eye(d)[None, :, :])
    z = np.linalg.solve(safe_cov, y[:, :, None])[:, :, 0]
    quad = np.einsum("nd,nd->n", y, z)
    safe_det = np.where(usable, det, 1.0)
    vals = (2.0 * math.pi) ** (-d / 2.0) * safe_det**-0.5 * np.exp(-0.5 * quad)
    return np.where(usable, vals, 0.0), usable


def _mean_estimate(x_query, vals: np.ndarray, usable: np.ndarray, epsilon) -> DensityEstimate:
    n_used = int(usable.sum())
    if n_used == 0:
        raise NoUsableSamplesError("no usable samples at this query point")
    used = vals[usable]
    mean = float(np.mean(used))
    se = float(np.std(used, ddof=1)) / math.sqrt(n_used) if n_used > 1 else float("inf")
    return DensityEstimate(x_query, mean, se, n_used, epsilon)


def _as_queries(xs, d: int) -> np.ndarray:
    q = np.asarray(xs, dtype=float)
    if d == 1:
        return np.atleast_1d(q).reshape(-1, 1)
    if q.ndim == 1:
        q = q[None, :]
    if q.shape[1] != d:
        raise ValueError(f"query points have dimension {q.shape[1]}, batch has {d}")
    return q


def shifted_kernel_density(
    b: TripleBatch, epsilon: float, xs, degenerate: str = "skip"
) -> list[DensityEstimate]:
    """Bias-reduced kernel estimate: mean of g(x - X_n - εA_n, εΓ_n)."""
    return _kernel_density(b, epsilon, xs, shift=True, identity_cov=False, degenerate=degenerate)


def plain_kernel_density(
    b: TripleBatch, epsilon: float, xs, variant: str = "gamma_cov", degenerate: str = "skip"
) -> list[DensityEstimate]:
    """Baselines without the A-shift: g(x - X_n, εI) or g(x - X_n, εΓ_n)."""
    if variant not in ("identity_cov", "gamma_cov"):
        raise ValueError("variant must be 'identity_cov' or 'gamma_cov'")
    return _kernel_density(
        b, epsilon, xs, shift=False, identity_cov=(variant == "identity_cov"),
        degenerate=degenerate,
    )


def _kernel_density(
    b: TripleBatch, epsilon: float, xs, shift: bool, identity_cov: bool, degenerate: str
) -> list[DensityEstimate]:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if b.n == 0:
        raise NoUsableSamplesError("empty batch")
    if degenerate not in ("skip", "ridge"):
        raise ValueError("degenerate policy must be 'skip' or 'ridge'")
    ridge = degenerate == "ridge"
    queries = _as_queries(xs, b.d)
    center = b.x + epsilon * b.a if shift else b.x
    out = []
    if b.d == 1:
        var = np.full(b.n, epsilon) if identity_cov else epsilon * b.gamma[:, 0, 0]
        c = center[:, 0]
        for q in queries:
            vals, usable = _kernel_values_1d(q[0] - c, var, ridge)
            out.append(_mean_estimate(float(q[0]), vals, usable, epsilon))
    else:
        cov = (
            np.broadcast_to(epsilon * np.eye(b.d), (b.n, b.d, b.d))
            if identity_cov
            else epsilon * b.gamma
        )
        for q in queries:
            vals, usable = _kernel_values_nd(q[None, :] - center, cov, ridge)
            out.append(_mean_estimate(q.copy(), vals, usable, epsilon))
    return out


# -- sign formulas ---------------------------------------------------------

def direct_weights(b: QuadBatch) -> tuple[np.ndarray, np.ndarray]:
    """W = -Γ[X,Γ[X]]/Γ² + 2A/Γ and the Γ > 0 usability mask."""
    usable = b.gamma > 0.0
    gam = np.where(usable, b.gamma, 1.0)
    w = -b.gamma_x_gammax / gam**2 + 2.0 * b.a / gam
    return np.where(usable, w, 0.0), usable


def regularized_weights(b: QuadBatch, epsilon: float) -> np.ndarray:
    """W_ε = -Γ[X,Γ[X]]/(ε+Γ)² + 2A/(ε+Γ); defined for every sample."""
    gam = epsilon + b.gamma
    return -b.gamma_x_gammax / gam**2 + 2.0 * b.a / gam


def conditional_weights(b: QuadBatch) -> tuple[np.ndarray, np.ndarray]:
    """Numerator weights Γ[X,G]/Γ - G·Γ[X,Γ[X]]/Γ² + 2·G·A/Γ.

    For G ≡ 1, Γ[X,G] = 0 these reduce term by term to direct_weights.
    """
    if not b.has_aux:
        raise ValueError("batch carries no auxiliary G data")
    usable = b.gamma > 0.0
    gam = np.where(usable, b.gamma, 1.0)
    w = b.gamma_x_g / gam - b.g * b.gamma_x_gammax / gam**2 + 2.0 * b.g * b.a / gam
    return np.where(usable, w, 0.0), usable


def _sign_estimate(x: float, xs_samples, weights, usable, epsilon=None) -> DensityEstimate:
    n_used = int(usable.sum())
    if n_used == 0:
        raise NoUsableSamplesError("no samples with positive square field")
    vals = 0.5 * np.sign(x - xs_samples[usable]) * weights[usable]
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1)) / math.sqrt(n_used) if n_used > 1 else float("inf")
    return DensityEstimate(x, mean, se, n_used, epsilon)


def direct_density(b: QuadBatch, xs) -> list[DensityEstimate]:
    """f(x) = ½ E[sign(x - X) W]; needs Γ > 0 on the used samples.

    Samples with Γ ≤ 0 fall outside the formula's hypotheses; they are
    excluded and visible through n_used (use regularized_density when the
    law of Γ touches 0).
    """
    w, usable = direct_weights(b)
    return [_sign_estimate(float(x), b.x, w, usable) for x in np.atleast_1d(xs)]


def regularized_density(b: QuadBatch, epsilon: float, xs) -> list[DensityEstimate]:
    """Monotone-in-ε lower approximation; no positivity needed on Γ."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    w = regularized_weights(b, epsilon)
    usable = np.ones(b.n, dtype=bool)
    return [_sign_estimate(float(x), b.x, w, usable, epsilon) for x in np.atleast_1d(xs)]


def conditional_expectation(b: QuadBatch, xs) -> list[ConditionalEstimate]:
    """Estimate E[G | X = x] as the ratio of the two sign formulas.

    The numerator estimates f(x)·E[G|X=x], the denominator f(x); the ratio
    carries a delta-method standard error and is flagged unreliable when
    the denominator is within two standard errors of zero.
    """
    wn, usable_n = conditional_weights(b)
    wd, usable_d = direct_weights(b)
    usable = usable_n & usable_d
    n_used = int(usable.sum())
    if n_used < 2:
        raise NoUsableSamplesError("not enough samples with positive square field")
    out = []
    for x in np.atleast_1d(xs):
        x = float(x)
        s = np.sign(x - b.x[usable])
        num_vals = 0.5 * s * wn[usable]
        den_vals = 0.5 * s * wd[usable]
        num = DensityEstimate(
            x, float(np.mean(num_vals)),
            float(np.std(num_vals, ddof=1)) / math.sqrt(n_used), n_used,
        )
        den = DensityEstimate(
            x, float(np.mean(den_vals)),
            float(np.std(den_vals, ddof=1)) / math.sqrt(n_used), n_used,
        )
        reliable = abs(den.value) > 2.0 * den.std_error
        if den.value != 0.0:
            ratio = num.value / den.value
            cov = np.cov(num_vals, den_vals, ddof=1)
            var_r = (
                cov[0, 0] - 2.0 * ratio * cov[0, 1] + ratio**2 * cov[1, 1]
            ) / (den.value**2 * n_used)
            se_r = math.sqrt(max(var_r, 0.0))
        else:
            ratio, se_r, reliable = float("nan"), float("inf"), False
        out.append(ConditionalEstimate(x, num, den, ratio, se_r, reliable))
    return out


def centered_direct_density(b: QuadBatch, xs, force_c: Optional[float] = None) -> list[DensityEstimate]:
    """Split-sample control variate on the centered weight.

    Half 1 fits the per-x constant c*(x) = Σ sign(x-X)W² / Σ W² (the
    variance minimiser of (sign - c)W when E[W] = 0); half 2 averages
    ½(sign(x-X) - c*)W.  Keeping the halves disjoint keeps the estimator
    unbiased.  force_c pins the constant (c = 0 reproduces direct_density
    on half 2).
    """
    h1, h2 = b.halves()
    w1, u1 = direct_weights(h1)
    w2, u2 = direct_weights(h2)
    if int(u2.sum()) == 0:
        raise NoUsableSamplesError("no usable samples in the estimation half")
    out = []
    for x in np.atleast_1d(xs):
        x = float(x)
        if force_c is not None:
            c = float(force_c)
        else:
            denom = float(np.sum(w1[u1] ** 2))
            c = float(np.sum(np.sign(x - h1.x[u1]) * w1[u1] ** 2)) / denom if denom > 0 else 0.0
        vals = 0.5 * (np.sign(x - h2.x[u2]) - c) * w2[u2]
        n_used = int(u2.sum())
        se = float(np.std(vals, ddof=1)) / math.sqrt(n_used) if n_used > 1 else float("inf")
        out.append(DensityEstimate(x, float(np.mean(vals)), se, n_used))
    return out


# -- identity statistics ----------------------------------------------------

def generator_centering_z(
    b: QuadBatch,
    phi_prime: Callable[[np.ndarray], np.ndarray],
    phi_second: Callable[[np.ndarray], np.ndarray],
) -> float:
    """z-score of mean[φ'(X) A + ½ φ''(X) Γ] against 0.

    The statistic is the generator applied to φ(X), whose expectation
    vanishes under the invariant law; a shifted A or wrong Γ breaks it.
    """
    stat = phi_prime(b.x) * b.a + 0.5 * phi_second(b.x) * b.gamma
    se = float(np.std(stat, ddof=1)) / math.sqrt(b.n)
    return float(np.mean(stat)) / se if se > 0 else 0.0


def ibp_residual_z(
    b: QuadBatch,
    phi_prime: Callable[[np.ndarray], np.ndarray],
    phi_second: Callable[[np.ndarray], np.ndarray],
    epsilon: float,
) -> float:
    """z-score of the regularised integration-by-parts residual.

    E[φ''(X) Γ/(ε+Γ)] + E[φ'(X)(Γ[X, 1/(ε+Γ)] + 2A/(ε+Γ))] = 0 for any
    smooth bounded φ and every ε > 0.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    resid = phi_second(b.x) * b.gamma / (epsilon + b.gamma) + phi_prime(b.x) * regularized_weights(b, epsilon)
    se = float(np.std(resid, ddof=1)) / math.sqrt(b.n)
    return float(np.mean(resid)) / se if se > 0 else 0.0


def weight_centering_z(b: QuadBatch) -> float:
    """z-score of mean W against 0 over the samples with Γ > 0.

    W is exactly centered whenever the direct formula's hypotheses hold;
    configurations at Γ = 0 (e.g. the empty-configuration atom of point
    process functionals) carry zero weight and are excluded.
    """
    w, usable = direct_weights(b)
    n_used = int(usable.sum())
    if n_used < 2:
        raise NoUsableSamplesError("not enough samples with positive square field")
    used = w[usable]
    se = float(np.std(used, ddof=1)) / math.sqrt(n_used)
    return float(np.mean(used)) / se if se > 0 else 0.0
