"""Scalar special functions: C_{n,s}, psi(p, t), its derivatives, a(p)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import binom, gamma

from .quadrature import DEFAULT_QUAD, QuadratureSpec, ball_integral, reduced_ball_integral, refine

SERIES_CUTOFF = 0.25
SERIES_TERMS = 16  # 0.25**32 ~ 5e-20


@dataclass(frozen=True)
class KernelParams:
    n: int
    s: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension n must be a positive integer, got {self.n}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")


def sphere_area(n: int) -> float:
    """|S^{n-1}| = 2 pi^{n/2} / Gamma(n/2); |S^0| = 2."""
    return 2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0)


def normalization_constant(params: KernelParams) -> float:
    n, s = params.n, params.s
    return 2.0 * n * (2.0 - 2.0 * s) / sphere_area(n)


def normalization_integral(params: KernelParams, r: float = 1.0, quad: QuadratureSpec = DEFAULT_QUAD):
    """(1/2) r^{2s-2} int_{B_r} y_n^2 |y|^{-n-2s} dy by quadrature; equals 1/C_{n,s}.

    Returns ``(value, error_estimate)``.
    """
    n, s = params.n, params.s

    def pair(y):
        return y[:, -1] ** 2

    val, err, _ = refine(lambda lv: ball_integral(pair, n, r, s, lv), quad, "normalization integral")
    scale = 0.5 * r ** (2.0 * s - 2.0)
    return scale * val, scale * err


# -- the symmetric power defect (1+z)^p + (1-z)^p - 2 -------------------------


def _falling(p, terms):
    """Falling factorials p(p-1)...(p-j+1)/j! and their p-derivatives, j = 0..terms."""
    c = np.empty(terms + 1)
    dc = np.empty(terms + 1)
    c[0], dc[0] = 1.0, 0.0
    for j in range(terms):
        c[j + 1] = c[j] * (p - j) / (j + 1)
        dc[j + 1] = (dc[j] * (p - j) + c[j]) / (j + 1)
    return c, dc


def power_defect(p: float, z):
    """(1+z)^p + (1-z)^p - 2 for |z| <= 1, without cancellation near z = 0."""
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z < SERIES_CUTOFF
    c, _ = _falling(p, 2 * SERIES_TERMS)
    zs2 = z[small] ** 2
    out[small] = 2.0 * np.polynomial.polynomial.polyval(zs2, np.concatenate([[0.0], c[2::2]]))
    zl = np.minimum(z[~small], 1.0)
    out[~small] = (1.0 + zl) ** p + (1.0 - zl) ** p - 2.0
    return out


def power_defect_dp(p: float, z):
    """d/dp of power_defect: (1+z)^p log(1+z) + (1-z)^p log(1-z)."""
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z < SERIES_CUTOFF
    _, dc = _falling(p, 2 * SERIES_TERMS)
    out[small] = 2.0 * np.polynomial.polynomial.polyval(z[small] ** 2, np.concatenate([[0.0], dc[2::2]]))
    zl = z[~small]
    w = 1.0 - zl
    tail = np.zeros_like(zl)
    pos = w > 0
    tail[pos] = w[pos] ** p * np.log(w[pos])
    out[~small] = (1.0 + zl) ** p * np.log1p(zl) + tail
    return out


def _psi_like(pair_of_zn, t, params: KernelParams, quad: QuadratureSpec, what: str):
    n, s = params.n, params.s
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    C = normalization_constant(params)

    val, err, _ = refine(lambda lv: reduced_ball_integral(pair_of_zn, n, t, s, lv), quad, what)
    scale = 0.5 * C * t ** (2.0 * s - 2.0)
    return scale * val, scale * err


def psi_with_error(p: float, t: float, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD):
    if p < 0:
        raise ValueError("psi requires p >= 0")
    return _psi_like(lambda zn: power_defect(p, zn), t, params, quad, f"psi({p}, {t})")


def psi(p: float, t: float, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """psi(p, t) = (C/2) t^{2s-2} int_{B_t} ((1+z_n)^p + (1-z_n)^p - 2) |z|^{-n-2s} dz."""
    return psi_with_error(p, t, params, quad)[0]


def psi_p_with_error(p: float, t: float, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD):
    if p <= 0:
        raise ValueError("psi_p requires p > 0")
    return _psi_like(lambda zn: power_defect_dp(p, zn), t, params, quad, f"psi_p({p}, {t})")


def psi_p(p: float, t: float, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Partial derivative of psi in p (quadrature of the log-weighted integrand)."""
    return psi_p_with_error(p, t, params, quad)[0]


def a_coeff(p: float, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Monomial coefficient: L_{R^n_+} x_n^p = a(p) x_n^{p-2} with a(p) = -psi(p, 1)."""
    return -psi(p, 1.0, params, quad)


class SeriesSum(NamedTuple):
    value: float
    last_increment: float
    tail_estimate: float


def a_prime_series(p: float, s: float, terms: int) -> SeriesSum:
    """Partial sum of the n = 1 double series for a'(p).

    a'(p) = C_{1,s} sum_{m>=1} sum_{l=1}^{2m} (-1)^l binom(p, 2m-l) / (l (m - s)).

    ``last_increment`` is |m = terms contribution|.  The increments decay only
    algebraically, like m^{-k}, so the remainder is much larger than the last
    increment; ``tail_estimate`` fits k from the last two increments and sums
    the power-law tail, |inc| m / (k - 1).  It is inf when no decay is seen.
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    C = normalization_constant(KernelParams(1, s))
    incs = np.empty(terms)
    for m in range(1, terms + 1):
        ell = np.arange(1, 2 * m + 1)
        incs[m - 1] = float(np.sum((-1.0) ** ell * binom(p, 2 * m - ell) / ell)) / (m - s)
    last = abs(C * incs[-1])
    tail = np.inf
    if last == 0.0:
        tail = 0.0
    elif terms >= 3 and incs[-2] != 0.0:
        k = np.log(abs(incs[-2] / incs[-1])) / np.log(terms / (terms - 1.0))
        if k > 1.0:
            tail = last * terms / (k - 1.0)
    return SeriesSum(float(C * incs.sum()), last, float(tail))


def psi_small_q_slope_with_error(t: float, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD):
    return _psi_like(lambda zn: np.log1p(-np.minimum(zn**2, 1.0)), t, params, quad, f"psi_q(0, {t})")


def psi_small_q_slope(t: float, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """d/dq psi(q, t) at q = 0+: (C/2) t^{2s-2} int_{B_t} log(1 - y_n^2) |y|^{-n-2s} dy (<= 0)."""
    return psi_small_q_slope_with_error(t, params, quad)[0]
