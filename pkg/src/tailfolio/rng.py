"""Deterministic random number plumbing.

All stochastic code in the package draws from counter-based Philox streams
through this module, and every normal variate is produced by inverse-CDF
transformation of a uniform. That combination is what makes runs bit-identical
across platforms and across serial/parallel lane schedules: the k-th draw of a
given (seed, stream) pair is a pure function of (seed, stream, k).

erfinv is computed here rather than imported: a rational initial guess
(Giles-style polynomial in w = -ln(1 - z^2)) polished by Newton iterations on
erf. Absolute accuracy is limited only by erf's own rounding, far below the
1e-12 the engine needs away from |z| -> 1.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_U64_MASK = (1 << 64) - 1
_INV_2_53 = 2.0 ** -53


def _philox(seed: int, stream: int = 0) -> np.random.Generator:
    key = np.array([seed & _U64_MASK, stream & _U64_MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def erfinv(z):
    """Inverse error function, vectorized.

    Newton iteration on erf with a rational initial guess. Exact +-1 map to
    +-inf; |z| > 1 raises ValueError.
    """
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(np.abs(z) > 1.0):
        raise ValueError("erfinv argument must lie in [-1, 1]")

    out = np.empty_like(z)
    hit = np.abs(z) == 1.0
    out[hit] = np.sign(z[hit]) * np.inf
    ok = ~hit

    x = z[ok]
    w = -np.log1p(-x * x)
    y = np.empty_like(x)

    # Rational seed, single-precision grade; branches on w as in the usual
    # polynomial fits for this function.
    lo = w < 5.0
    ww = w[lo] - 2.5
    p = np.full_like(ww, 2.81022636e-08)
    for c in (3.43273939e-07, -3.5233877e-06, -4.39150654e-06, 2.1858087e-04,
              -1.25372503e-03, -4.17768164e-03, 2.46640727e-01, 1.50140941e+00):
        p = p * ww + c
    y[lo] = p * x[lo]

    hi_mask = ~lo
    ww = np.sqrt(w[hi_mask]) - 3.0
    p = np.full_like(ww, -2.00214257e-04)
    for c in (1.00950558e-04, 1.34934322e-03, -3.67342844e-03, 5.73950773e-03,
              -7.62246130e-03, 9.43887047e-03, 1.00167406e+00, 2.83297682e+00):
        p = p * ww + c
    y[hi_mask] = p * x[hi_mask]

    # Newton polish: y <- y - (erf(y) - x) * sqrt(pi)/2 * exp(y^2).
    half_sqrt_pi = 0.8862269254527580
    for _ in range(3):
        err = erf(y) - x
        y = y - err * half_sqrt_pi * np.exp(np.minimum(y * y, 700.0))

    out[ok] = y
    return out[0] if scalar else out


class UniformStream:
    """Buffered stream of uniforms on the open interval (0, 1).

    Values are (i >> 11 + 0.5) * 2^-53 from raw Philox 64-bit words, so 0 and
    1 are never produced and every value is a deterministic function of the
    draw index alone.
    """

    def __init__(self, seed: int, stream: int = 0, block: int = 8192):
        self._gen = _philox(seed, stream)
        self._block = int(block)
        self._buf = np.empty(0)
        self._pos = 0

    def _refill(self, need: int) -> None:
        n = max(self._block, need)
        raw = self._gen.integers(0, np.iinfo(np.uint64).max, size=n,
                                 dtype=np.uint64, endpoint=True)
        self._buf = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53
        self._pos = 0

    def take(self, n: int) -> np.ndarray:
        if self._pos + n > self._buf.size:
            left = self._buf[self._pos:]
            self._refill(n - left.size)
            if left.size:
                out = np.concatenate([left, self._buf[:n - left.size]])
                self._pos = n - left.size
                return out
        out = self._buf[self._pos:self._pos + n]
        self._pos += n
        return out.copy()

    def one(self) -> float:
        if self._pos >= self._buf.size:
            self._refill(1)
        v = self._buf[self._pos]
        self._pos += 1
        return float(v)


class NormalStream:
    """Standard normal stream via inverse-CDF of a UniformStream."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._uniforms = UniformStream(seed, stream)

    def draw(self, n: int) -> np.ndarray:
        u = self._uniforms.take(int(n))
        return np.sqrt(2.0) * erfinv(2.0 * u - 1.0)


def standard_normal_stream(seed: int, stream: int = 0) -> NormalStream:
    """Deterministic standard normal generator for (seed, stream)."""
    return NormalStream(seed, stream)
