"""Gaussian copula layer over two-tailed exponential marginals.

Each channel's increment dx is mapped to a standard normal coordinate

    dy = sqrt(2) sgn(dx - m) erfinv(1 - exp(-|dx - m|/chi))

which is the normal quantile of the marginal's cdf. The inverse map is

    dx = m - sgn(dy) chi ln(1 - erf(|dy|/sqrt 2))

evaluated through erfc to keep the tail accurate. Channel dependence lives
entirely in the correlation matrix of the dy coordinates: the joint density is
the copula factor det(G)^{-1/2} exp(-1/2 dy' (G^{-1} - I) dy) times the
product of marginal densities. The same quadratic form defines an effective
action A = L dt + 1/2 ln det G + (N/2) ln(2 pi dt) with
L = dy' G^{-1} dy / (2 dt^2).

Correlation is estimated from trailing moving-average pre-smoothed dy series,
normalized to unit diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import erf, erfc

from .errors import (DimensionMismatch, IllConditioned, NotPositiveDefinite,
                     OutOfDomain, WindowTooShort)
from .marginals import ExponentialMarginal
from .rng import erfinv

Y_MAX = 8.0
EPS_PD = 1e-10
_SQRT2 = float(np.sqrt(2.0))


def to_gaussian(marginal: ExponentialMarginal, dx, y_max: float = Y_MAX):
    """Map increments to standard normal coordinates, clamped to |dy| <= y_max.

    The erfinv argument is formed as -expm1(-t) so the complement survives in
    the tail; arguments within one ulp of 1 would otherwise lose everything.
    """
    t = np.asarray(dx, dtype=float) - marginal.m
    sign = np.sign(t)
    chi = np.where(t < 0.0, marginal.width_below(), marginal.width_above())
    z = -np.expm1(-np.abs(t) / chi)
    dy = _SQRT2 * sign * erfinv(z)
    dy = np.clip(dy, -y_max, y_max)
    return float(dy) if dy.ndim == 0 else dy


def from_gaussian(marginal: ExponentialMarginal, dy):
    """Inverse of to_gaussian (for unclamped |dy|)."""
    y = np.asarray(dy, dtype=float)
    sign = np.sign(y)
    chi = np.where(y < 0.0, marginal.width_below(), marginal.width_above())
    dx = marginal.m - sign * chi * np.log(erfc(np.abs(y) / _SQRT2))
    return float(dx) if dx.ndim == 0 else dx


def cholesky_lower(matrix, pivot_floor: float = 0.0) -> np.ndarray:
    """Lower-triangular Cholesky factor with explicit pivot control.

    Raises NotPositiveDefinite as soon as a pivot (the remaining diagonal
    element before its square root) fails to exceed pivot_floor.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch("matrix must be square")
    n = a.shape[0]
    c = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - c[j, :j] @ c[j, :j]
        if not (d > pivot_floor):
            raise NotPositiveDefinite(
                f"pivot {d:.6e} at index {j} not above floor {pivot_floor:.3e}")
        c[j, j] = np.sqrt(d)
        if j + 1 < n:
            c[j + 1:, j] = (a[j + 1:, j] - c[j + 1:, :j] @ c[j, :j]) / c[j, j]
    return c


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Validated unit-diagonal positive definite matrix with cached factors."""

    matrix: np.ndarray      # G, the correlation entries
    cholesky: np.ndarray    # lower C with C C' = G
    inverse: np.ndarray     # G^{-1}
    det: float              # det G

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, matrix, eps_pd: float = EPS_PD) -> "CorrelationMatrix":
        g = np.array(matrix, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DimensionMismatch("correlation matrix must be square")
        if not np.allclose(g, g.T, atol=1e-12):
            raise OutOfDomain("correlation matrix must be symmetric")
        if not np.allclose(np.diag(g), 1.0, atol=1e-12):
            raise OutOfDomain("correlation matrix must have unit diagonal")
        if np.any(np.abs(g) > 1.0 + 1e-12):
            raise OutOfDomain("correlation entries must lie in [-1, 1]")
        g = 0.5 * (g + g.T)
        np.fill_diagonal(g, 1.0)
        floor = eps_pd * float(np.max(np.diag(g)))
        c = cholesky_lower(g, pivot_floor=floor)
        c_inv = solve_triangular(c, np.eye(g.shape[0]), lower=True)
        inverse = c_inv.T @ c_inv
        det = float(np.exp(2.0 * np.sum(np.log(np.diag(c)))))
        return cls(matrix=g, cholesky=c, inverse=inverse, det=det)


def identity_correlation(n: int) -> CorrelationMatrix:
    return CorrelationMatrix.from_matrix(np.eye(n))


def estimate_correlation(y_series, pre_average_window: int = 3,
                         eps_pd: float = EPS_PD) -> CorrelationMatrix:
    """Correlation of pre-averaged normal coordinates.

    y_series has shape (channels, epochs). Each channel is smoothed with a
    trailing moving average of the given window (output length T - w + 1)
    before the population covariance is taken and normalized to unit diagonal.
    """
    y = np.asarray(y_series, dtype=float)
    if y.ndim != 2:
        raise DimensionMismatch("y_series must be 2-D (channels, epochs)")
    n, t = y.shape
    w = int(pre_average_window)
    if w < 1:
        raise OutOfDomain("pre-average window must be >= 1")
    if t < w:
        raise WindowTooShort(f"{t} epochs cannot support window {w}")
    if w > 1:
        kernel = np.ones(w) / w
        y = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, y)
    t_eff = y.shape[1]
    if t_eff <= n:
        raise WindowTooShort(
            f"{t_eff} pre-averaged epochs for {n} channels; need more epochs than channels")
    centered = y - y.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / t_eff
    d = np.sqrt(np.diag(cov))
    if np.any(d <= 0.0):
        raise IllConditioned("a channel has zero variance after pre-averaging")
    corr = cov / np.outer(d, d)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    corr = np.clip(corr, -1.0, 1.0)
    try:
        return CorrelationMatrix.from_matrix(corr, eps_pd=eps_pd)
    except NotPositiveDefinite as exc:
        raise IllConditioned(str(exc)) from exc


@dataclass(frozen=True, eq=False)
class CopulaModel:
    """Marginals plus correlation; the joint model of channel increments."""

    marginals: tuple[ExponentialMarginal, ...]
    correlation: CorrelationMatrix
    channels: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.marginals) != self.correlation.dim:
            raise DimensionMismatch("marginal count must match correlation dimension")
        if not self.channels:
            object.__setattr__(
                self, "channels",
                tuple(f"ch{i}" for i in range(len(self.marginals))))
        elif len(self.channels) != len(self.marginals):
            raise DimensionMismatch("channel name count must match marginal count")

    @property
    def dim(self) -> int:
        return len(self.marginals)


def transform_to_gaussian(model: CopulaModel, dx) -> np.ndarray:
    """Apply to_gaussian channel-wise to rows of dx, shape (..., N)."""
    dx = np.asarray(dx, dtype=float)
    if dx.shape[-1] != model.dim:
        raise DimensionMismatch("dx last axis must match channel count")
    cols = [to_gaussian(m, dx[..., j]) for j, m in enumerate(model.marginals)]
    return np.stack(cols, axis=-1)


def copula_density(corr: CorrelationMatrix, dy):
    """Copula factor det(G)^{-1/2} exp(-1/2 dy' (G^{-1} - I) dy)."""
    dy = np.asarray(dy, dtype=float)
    if dy.shape[-1] != corr.dim:
        raise DimensionMismatch("dy last axis must match correlation dimension")
    excess = corr.inverse - np.eye(corr.dim)
    q = np.einsum("...i,ij,...j->...", dy, excess, dy)
    out = corr.det ** -0.5 * np.exp(-0.5 * q)
    return float(out) if out.ndim == 0 else out


def joint_density(model: CopulaModel, dx):
    """Joint increment density: copula factor times marginal densities."""
    from .marginals import pdf

    dx = np.asarray(dx, dtype=float)
    dy = transform_to_gaussian(model, dx)
    dens = copula_density(model.correlation, dy)
    for j, m in enumerate(model.marginals):
        dens = dens * pdf(m, dx[..., j])
    return float(dens) if np.ndim(dens) == 0 else dens


def effective_action(corr: CorrelationMatrix, dy, dt: float):
    """A = L dt + 1/2 ln det G + (N/2) ln(2 pi dt), L = dy' G^{-1} dy / (2 dt^2)."""
    if not (dt > 0.0 and np.isfinite(dt)):
        raise OutOfDomain("dt must be positive")
    dy = np.asarray(dy, dtype=float)
    if dy.shape[-1] != corr.dim:
        raise DimensionMismatch("dy last axis must match correlation dimension")
    lagr = np.einsum("...i,ij,...j->...", dy, corr.inverse, dy) / (2.0 * dt * dt)
    out = lagr * dt + 0.5 * np.log(corr.det) + 0.5 * corr.dim * np.log(2.0 * np.pi * dt)
    return float(out) if out.ndim == 0 else out
