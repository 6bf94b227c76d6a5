"""Boundary-regularity diagnostics on exact or discrete solutions."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .domain import Ball, Domain, DomainError, HalfSpace, Interval
from .quadrature import DEFAULT_QUAD, QuadratureError, QuadratureSpec
from .solver import GridFunction, assemble, halfline_strip_grid, solve_dirichlet
from .special_fn import KernelParams

ALPHA_GRID = tuple(np.round(np.arange(1, 21) * 0.05, 2))


# -- the u/d expansion ------------------------------------------------------------


@dataclass
class Profile:
    d: np.ndarray
    q: np.ndarray  # u / d


def _values(u, pts):
    out = np.asarray(u(pts), dtype=float)
    return out.reshape(pts.shape[0])


def boundary_quotient_profile(u, domain: Domain, x0, direction, depths: Sequence[float]) -> Profile:
    """u/d sampled along the ray x0 + t * direction (direction points inward)."""
    t = np.asarray(depths, dtype=float)
    if t.size == 0 or np.any(t <= 0):
        raise ValueError("depths must be positive")
    r = domain.geometry_constants().inradius
    if np.any(t > r):
        raise DomainError(f"depths exceed the inradius {r}")
    v = np.atleast_1d(np.asarray(direction, dtype=float))
    v = v / np.linalg.norm(v)
    pts = np.atleast_1d(np.asarray(x0, dtype=float))[None, :] + t[:, None] * v[None, :]
    d = np.asarray(domain.distance(pts), dtype=float)
    if np.any(d <= 0):
        raise DomainError("ray leaves the domain")
    return Profile(d, _values(u, pts) / d)


@dataclass
class RegularityReport:
    c0: float
    alpha_hat: Optional[float]
    fit_residual: float
    window: tuple
    K: float = 0.0
    annotations: dict = field(default_factory=lambda: {
        "alpha0(s)": "existential; not computable", "alpha_*": "existential; not computable"})

    def __post_init__(self):
        if not (self.window[0] > 0 and self.fit_residual >= 0):
            raise ValueError("invalid regularity report")


def fit_boundary_expansion(profile: Profile, alpha_grid: Sequence[float] = ALPHA_GRID,
                           window: Optional[tuple] = None) -> RegularityReport:
    """Least squares u/d = c0 + K d^alpha for each alpha on the grid; keep the best.

    A profile that is constant within round-off returns alpha_hat = None.
    """
    d, q = np.asarray(profile.d, dtype=float), np.asarray(profile.q, dtype=float)
    if window is not None:
        keep = (d >= window[0]) & (d <= window[1])
        d, q = d[keep], q[keep]
    if d.size < 8 or d.max() < 10.0 * d.min():
        raise ValueError("need at least 8 profile points spanning a decade in d")
    win = (float(d.min()), float(d.max()))
    noise = 1e-10 * max(1.0, float(np.max(np.abs(q))))
    if np.ptp(q) <= noise:
        return RegularityReport(float(np.mean(q)), None, float(np.std(q)), win)
    best = None
    for a in alpha_grid:
        X = np.column_stack([np.ones_like(d), d**a])
        coef, *_ = np.linalg.lstsq(X, q, rcond=None)
        res = float(np.sqrt(np.mean((X @ coef - q) ** 2)))
        if best is None or res < best[0]:
            best = (res, float(a), coef)
    res, a, coef = best
    return RegularityReport(float(coef[0]), a, res, win, float(coef[1]))


# -- oscillation decay ----------------------------------------------------------------


@dataclass
class OscillationSequence:
    levels: np.ndarray
    m: np.ndarray
    M: np.ndarray
    ratios: np.ndarray

    def __post_init__(self):
        if np.any(self.m > self.M):
            raise ValueError("m_k must not exceed M_k")

    @property
    def gaps(self) -> np.ndarray:
        return self.M - self.m

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else float("nan")


def oscillation_contraction(u, levels: int = 6, samples: Optional[np.ndarray] = None,
                            per_window: int = 64) -> OscillationSequence:
    """m_k, M_k = inf, sup of u/x on (0, 4^-k) and the ratios of successive gaps.

    ``u`` is a callable on (0, 1], sampled on a geometric grid reaching six
    levels below the last window; or pass ``samples = (x, u(x))`` from a
    discrete profile, in which case only windows holding at least 4 samples
    are used.
    """
    if samples is not None:
        x, ux = (np.asarray(a, dtype=float) for a in samples)
        keep = (x > 0) & (x <= 1)
        x, ux = x[keep], ux[keep]
        usable = [k for k in range(levels) if np.sum(x < 4.0**-k) >= 4]
    else:
        x = np.geomspace(4.0 ** -(levels + 6), 1.0, per_window * (levels + 6))
        ux = np.asarray(u(x), dtype=float)
        usable = list(range(levels))
    if np.any(ux <= 0):
        raise ValueError("profile must be positive on (0, 1]")
    if len(usable) < 2:
        raise ValueError("fewer than 2 resolvable levels")
    q = ux / x
    m = np.array([q[x < 4.0**-k].min() for k in usable])
    M = np.array([q[x < 4.0**-k].max() for k in usable])
    gaps = M - m
    tol = 1e-12 * np.max(np.abs(M))
    ratios = np.array([0.0 if gaps[k] <= tol else gaps[k + 1] / gaps[k] for k in range(len(usable) - 1)])
    return OscillationSequence(np.array(usable), m, M, ratios)


def harnack_quotient(x, u) -> float:
    """sup(u/x) / inf(u/x) over the samples in (0, 1]."""
    x, u = np.asarray(x, dtype=float), np.asarray(u, dtype=float)
    keep = (x > 0) & (x <= 1)
    q = u[keep] / x[keep]
    if np.any(q <= 0):
        raise ValueError("profile must be positive")
    return float(q.max() / q.min())


# -- Liouville -----------------------------------------------------------------------


@dataclass
class LinearityReport:
    c0: float
    deviation: float
    growth_bound: Optional[float]


def liouville_linearity_check(x, u, growth_bound: Optional[float] = None) -> LinearityReport:
    """Best fit c0 x through the origin and max |u - c0 x| / max |c0 x|."""
    x, u = np.asarray(x, dtype=float), np.asarray(u, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    c0 = float(x @ u / (x @ x))
    scale = float(np.max(np.abs(c0 * x)))
    dev = float(np.max(np.abs(u - c0 * x)))
    return LinearityReport(c0, dev / scale if scale > 0 else (0.0 if dev == 0 else np.inf), growth_bound)


def discrete_harmonic_profile(params: KernelParams, level: int, tail: Callable = lambda x: x,
                              **grid_kw) -> GridFunction:
    """Discrete L-harmonic profile on (0, 1) with u(0) = 0 and u = tail on [1, 2]."""
    grid = halfline_strip_grid(level, **grid_kw)
    A = assemble(grid.domain, grid, params)
    u, _ = solve_dirichlet(A, 0.0, lambda x: np.where(np.asarray(x) > 0, tail(np.asarray(x)), 0.0))
    return u


def window_for(hb: float, inradius: float) -> tuple:
    """(min(10 h_b, inradius / 100), inradius / 4): wider than a decade, above grid noise when possible."""
    hi = inradius / 4.0
    return min(10.0 * hb, hi / 25.0), hi


def default_window(grid) -> tuple:
    """window_for with h_b the width of the cell touching the boundary."""
    if grid.kind == "line":
        hb = float(np.min(np.diff(np.sort(grid.points))))
    else:
        hb = float(grid.radii[-1] - grid.radii[-2])
    return window_for(hb, grid.domain.geometry_constants().inradius)


def distance_bounds(u: GridFunction):
    """(c, C) with c d <= u <= C d at the free nodes."""
    q = u.interior / u.grid.distance
    return float(q.min()), float(q.max())


# -- weighted L1 -------------------------------------------------------------------


def _nquad(fun, ranges, quad: QuadratureSpec):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.nquad(fun, ranges, opts={"epsabs": quad.abs_tol, "epsrel": quad.rel_tol,
                                                          "limit": 200})
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"weighted L1 quadrature: {exc}", float("nan"), float("inf")) from None
    return val


def weighted_l1_norm(u, domain: Domain, mu: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """int_Omega |u(y)| / (1 + |y|^{n+mu}) dy for intervals, balls (n <= 3) and half spaces (n <= 2)."""
    n = domain.dim

    def w(y):
        return 1.0 / (1.0 + np.linalg.norm(y) ** (n + mu))

    def g(*y):
        y = np.array(y)
        return abs(float(np.ravel(u(y[None, :]))[0])) * w(y)

    if isinstance(domain, Interval):
        return _nquad(g, [(domain.a, domain.b)], quad)
    if isinstance(domain, Ball):
        c, R = np.asarray(domain.c), domain.radius
        if n == 1:
            return _nquad(g, [(c[0] - R, c[0] + R)], quad)
        if n == 2:
            f = lambda r, t: r * g(*(c + r * np.array([np.cos(t), np.sin(t)])))
            return _nquad(f, [(0.0, R), (0.0, 2 * np.pi)], quad)
        if n == 3:
            f = lambda r, t, p: r * r * np.sin(t) * g(*(c + r * np.array(
                [np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])))
            return _nquad(f, [(0.0, R), (0.0, np.pi), (0.0, 2 * np.pi)], quad)
    if isinstance(domain, HalfSpace) and n <= 2:
        ranges = [(-np.inf, np.inf)] * (n - 1) + [(0.0, np.inf)]
        return _nquad(g, ranges, quad)
    raise ValueError(f"weighted_l1_norm does not support {domain!r}")
