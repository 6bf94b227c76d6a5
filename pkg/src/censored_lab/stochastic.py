"""Monte Carlo for the Dirichlet problem via the process generated by -L.

The jump measure of -L at x is nu(dy) = C d^{2s-2} |y|^{-n-2s} dy on B_d, d = d(x).

* Jumps with |y| >= eps d have total mass
      lambda(x) = C |S^{n-1}| (eps^{-2s} - 1) / (2s) * d^{-2},
  since the d^{2s-2} prefactor multiplies (eps d)^{-2s} - d^{-2s}.
* Jumps with |y| < eps d are replaced by a diffusion.  Their second moment
      int_{|y|<eps d} y_i y_j nu(dy) = C d^{2s-2} (|S|/n) (eps d)^{2-2s} / (2-2s) delta_ij
                                     = 2 eps^{2-2s} delta_ij
  (using C |S| = 2n(2-2s)), so the small jumps act like eps^{2-2s} Laplace:
  Brownian motion with per-coordinate variance rate 2 eps^{2-2s}, the same
  everywhere in the domain.

Paths run in fixed blocks; block ``k`` draws from SeedSequence(seed, spawn_key=(k,)),
so results do not depend on the number of workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import Domain, DomainError
from .fields import ScalarField
from .quadrature import DEFAULT_QUAD, QuadratureSpec, ball_integral, refine
from .special_fn import KernelParams, normalization_constant, sphere_area

BLOCK = 2048
TRUNCATION_FLAG = 0.01


@dataclass(frozen=True)
class JumpConfig:
    epsilon: float = 0.05
    max_steps: int = 100_000
    boundary_layer: Optional[float] = None  # default 1e-4 * inradius
    seed: int = 0
    c_dt: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.boundary_layer is not None and not self.boundary_layer > 0:
            raise ValueError("boundary_layer must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.c_dt > 0:
            raise ValueError("c_dt must be positive")

    def layer(self, domain: Domain) -> float:
        if self.boundary_layer is not None:
            return self.boundary_layer
        r = domain.geometry_constants().inradius
        if not np.isfinite(r):
            raise DomainError("unbounded domain: give boundary_layer explicitly")
        return 1e-4 * r


@dataclass
class PathStats:
    estimate: float
    std_error: float
    paths: int
    mean_steps: float
    mean_exit_time: float
    truncated: int = 0

    def __post_init__(self):
        if self.std_error < 0 or self.paths < 1:
            raise ValueError("invalid path statistics")

    @property
    def truncated_fraction(self) -> float:
        return self.truncated / self.paths

    @property
    def flagged(self) -> bool:
        return self.truncated_fraction > TRUNCATION_FLAG


def jump_intensity(params: KernelParams, epsilon: float) -> float:
    """lambda(x) d(x)^2: the rate of jumps longer than eps d, in units of d^-2."""
    s = params.s
    return normalization_constant(params) * sphere_area(params.n) * (epsilon ** (-2 * s) - 1.0) / (2 * s)


def diffusion_coefficient(s: float, epsilon: float) -> float:
    """D in the compensating generator D * Laplace; the variance rate is 2D."""
    return epsilon ** (2.0 - 2.0 * s)


def compensation_integral(params: KernelParams, epsilon: float, d: float, quad: QuadratureSpec = DEFAULT_QUAD):
    """(C/2) d^{2s-2} int_{|y|<eps d} y_1^2 |y|^{-n-2s} dy by quadrature; equals eps^{2-2s}."""
    n, s = params.n, params.s
    val, err, _ = refine(lambda lv: ball_integral(lambda y: y[:, 0] ** 2, n, epsilon * d, s, lv), quad,
                         "compensation integral")
    pref = 0.5 * normalization_constant(params) * d ** (2.0 * s - 2.0)
    return pref * val, pref * err


def _radii(d, s, epsilon, u):
    # inverse CDF of rho^{-1-2s} on [eps d, d]
    a = d ** (-2.0 * s)
    return (u * a + (1.0 - u) * (epsilon * d) ** (-2.0 * s)) ** (-1.0 / (2.0 * s))


def _directions(rng, count, n):
    if n == 1:
        return np.where(rng.random((count, 1)) < 0.5, -1.0, 1.0)
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_jump(x, d: float, params: KernelParams, rng: np.random.Generator, epsilon: float = 0.05, size=None):
    """Displacement(s) with radius density ~ rho^{-1-2s} on [eps d, d] and uniform direction."""
    if not d > 0:
        raise ValueError("d must be positive")
    n = params.n
    count = 1 if size is None else int(size)
    r = _radii(d, params.s, epsilon, rng.random(count))
    out = r[:, None] * _directions(rng, count, n)
    return out[0] if size is None else out


def _run_block(domain: Domain, f: ScalarField, x0, count, config: JumpConfig, params: KernelParams,
               layer: float, key: int):
    """One block of paths.

    A step from x lasts dt = min(c_dt d^2, time left on the jump clock at rate
    lambda(x)).  If the clock rings the path jumps from x with the law at x;
    the diffusion accumulated over dt is then applied as one Gaussian kick.
    Rate and jump law thus refer to the same point, which makes the expected
    increment of any quadratic exact.  A kick that leaves the layer after a
    plain diffusion step is counted pro rata; after a jump the whole wait
    already happened at x and counts in full.
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(key,)))
    n, s, eps = params.n, params.s, config.epsilon
    lam0 = jump_intensity(params, eps)
    sigma = np.sqrt(2.0 * diffusion_coefficient(s, eps))
    X = np.tile(np.asarray(x0, dtype=float), (count, 1))
    integral = np.zeros(count)
    time = np.zeros(count)
    steps = np.zeros(count, dtype=np.int64)
    clock = rng.exponential(size=count)  # hazard left until the next big jump
    alive = np.arange(count)
    while alive.size:
        x = X[alive]
        d = domain.signed_distance(x)
        lam = lam0 / d**2
        cap = config.c_dt * d**2
        dt_clock = clock[alive] / lam
        ring = dt_clock <= cap
        dt = np.minimum(cap, dt_clock)
        fx = f.eval(x)
        xn = x.copy()
        idx = np.flatnonzero(ring)
        if idx.size:
            r = _radii(d[idx], s, eps, rng.random(idx.size))
            xn[idx] += r[:, None] * _directions(rng, idx.size, n)
        clock[alive] -= lam * dt
        clock[alive[idx]] = rng.exponential(size=idx.size)
        xn += sigma * np.sqrt(dt)[:, None] * rng.standard_normal(x.shape)
        dn = domain.signed_distance(xn)
        out = dn < layer
        frac = np.ones(alive.size)
        m = out & ~ring
        frac[m] = np.clip((d[m] - layer) / np.maximum(d[m] - dn[m], 1e-300), 0.0, 1.0)
        integral[alive] += fx * dt * frac
        time[alive] += dt * frac
        steps[alive] += 1
        X[alive] = xn
        alive = alive[~out & (steps[alive] < config.max_steps)]
    truncated = int(np.sum(steps >= config.max_steps))
    return integral, steps, time, truncated


def estimate_solution(domain: Domain, f: ScalarField, x0, paths: int, config: JumpConfig, params: KernelParams,
                      workers: int = 1) -> PathStats:
    """Estimate u(x0) = E int_0^tau f(X_t) dt for L u = f, u = 0 outside."""
    if paths < 1:
        raise ValueError("paths must be >= 1")
    x0 = np.asarray(domain.as_points(x0), dtype=float).ravel()
    if domain.signed_distance(x0[None])[0] <= 0:
        raise DomainError("x0 must be interior")
    layer = config.layer(domain)
    sizes = [min(BLOCK, paths - k) for k in range(0, paths, BLOCK)]
    run = lambda kc: _run_block(domain, f, x0, kc[1], config, params, layer, kc[0])
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, enumerate(sizes)))
    else:
        parts = [run(kc) for kc in enumerate(sizes)]
    integral = np.concatenate([p[0] for p in parts])
    steps = np.concatenate([p[1] for p in parts])
    times = np.concatenate([p[2] for p in parts])
    se = float(integral.std(ddof=1) / np.sqrt(paths)) if paths > 1 else 0.0
    return PathStats(float(integral.mean()), se, paths, float(steps.mean()), float(times.mean()),
                     sum(p[3] for p in parts))


@dataclass
class CrossValidation:
    points: np.ndarray
    mc: np.ndarray
    std_error: np.ndarray
    deterministic: np.ndarray
    z: np.ndarray = field(init=False)
    threshold: float = 4.0

    def __post_init__(self):
        diff = self.mc - self.deterministic
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.std_error > 0, diff / self.std_error, np.where(diff == 0, 0.0, np.inf))
        self.z = z

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.z) <= self.threshold))


def cross_validate(domain: Domain, f: ScalarField, points: Sequence, paths: int, config: JumpConfig,
                   params: KernelParams, solution, workers: int = 1) -> CrossValidation:
    """z-scores of MC estimates against an interpolated deterministic solution (a GridFunction)."""
    if paths < 1:
        raise ValueError("paths must be >= 1")
    pts = np.asarray(domain.as_points(points), dtype=float).reshape(-1, domain.dim)
    stats = [estimate_solution(domain, f, p, paths, config, params, workers) for p in pts]
    det = np.array([float(np.ravel(solution(p))[0]) for p in pts])
    return CrossValidation(pts, np.array([st.estimate for st in stats]),
                           np.array([st.std_error for st in stats]), det)
