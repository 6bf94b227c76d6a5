"""Pointwise evaluation of the censored operator by singular quadrature.

    L u(x) = (C_{n,s}/2) d(x)^{2s-2} int_{B_d(x)} (2u(x) - u(x+y) - u(x-y)) |y|^{-n-2s} dy

The field is only ever sampled inside the closed ball B_{d(x)}(x).
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .domain import Domain, HalfLineSection, SmoothedDistance, kernel_dimension
from .fields import ScalarField
from .quadrature import (
    DEFAULT_QUAD,
    QuadratureError,
    QuadratureSpec,
    ball_integral,
    graded_edges,
    order_for_level,
    panel_rule,
    reduced_ball_integral,
    refine,
    sphere_directions,
    weight_mass,
)
from .quadrature import EPS
from .special_fn import KernelParams, normalization_constant

NEAR_BOUNDARY = 1e-6


class BoundaryProximityWarning(UserWarning):
    """Evaluation point so close to the boundary that the second difference is unreliable."""


@dataclass(frozen=True)
class OperatorEvaluation:
    value: float
    error_estimate: float
    refinement_depth_used: int

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error estimate must be nonnegative")


def _point(domain: Domain, x):
    x = np.asarray(domain.as_points(x), dtype=float)
    if x.ndim != 1:
        raise ValueError("apply_pointwise takes a single point; use apply_batch for several")
    return x


def _check_interior(domain: Domain, x):
    d = float(domain.distance(x))
    if d <= 0:
        raise ValueError("the operator is only defined at interior points")
    if d < NEAR_BOUNDARY * max(1.0, float(np.max(np.abs(x)))):
        warnings.warn(f"d(x)={d:.2e}: second differences lose precision this close to the boundary",
                      BoundaryProximityWarning, stacklevel=3)
    return d


def _evaluate(integrate: Callable[[int], float], prefactor: float, quad: QuadratureSpec, what: str,
              floor: float = 0.0):
    # tolerance applies to the final value, so rescale before refining
    try:
        val, err, level = refine(lambda lv: prefactor * integrate(lv), quad, what, floor)
    except QuadratureError as exc:
        raise QuadratureError(f"{what} did not converge", exc.estimate, exc.error) from None
    return OperatorEvaluation(float(val), float(err), 4 * level)


def apply_pointwise(domain: Domain, u: ScalarField, x, params: KernelParams,
                    quad: QuadratureSpec = DEFAULT_QUAD) -> OperatorEvaluation:
    """L_Omega u(x) at one interior point."""
    if isinstance(domain, HalfLineSection):
        return apply_halfspace_1d(lambda t: u(t), float(np.ravel(x)[0]), params, quad)
    x = _point(domain, x)
    n, s = params.n, params.s
    if n != kernel_dimension(domain):
        raise ValueError(f"params.n={n} does not match the domain dimension {kernel_dimension(domain)}")
    d = _check_interior(domain, x)
    axis = domain.boundary_direction(x)
    u0 = float(u.eval(x[None, :])[0])

    def pair(y):
        return (u0 - u.eval(x + y)) + (u0 - u.eval(x - y))

    pref = 0.5 * normalization_constant(params) * d ** (2.0 * s - 2.0)
    floor = _roundoff(u, x, d, n, s, pref, quad)
    return _evaluate(lambda lv: ball_integral(pair, n, d, s, lv, axis), pref, quad, "operator quadrature", floor)


def _roundoff(u: ScalarField, x, d, n, s, pref, quad):
    """Round-off level of the quadrature sum.

    Each pair value carries the rounding of four field values plus the
    rounding of the sample points themselves (eps |x| times the gradient).
    """
    omega, _ = sphere_directions(n, 1)
    probe = x + d * np.vstack([omega, -omega, np.zeros((1, n))])
    vals = u.eval(probe)
    slope = float(np.max(vals) - np.min(vals)) / d
    scale = float(np.max(np.abs(vals))) + (float(np.max(np.abs(x))) + d) * slope
    return 2.0 * EPS * scale * pref * weight_mass(n, d, s, min(quad.max_level, 3))


def apply_batch(domain: Domain, u: ScalarField, points: Sequence, params: KernelParams,
                quad: QuadratureSpec = DEFAULT_QUAD, workers: int = 1):
    """apply_pointwise over many points; results are ordered like ``points``."""
    pts = [np.asarray(p, dtype=float) for p in points]
    if workers <= 1:
        return [apply_pointwise(domain, u, p, params, quad) for p in pts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: apply_pointwise(domain, u, p, params, quad), pts))


def apply_halfspace_1d(profile: Callable, x_n: float, params: KernelParams,
                       quad: QuadratureSpec = DEFAULT_QUAD) -> OperatorEvaluation:
    """L_{R^n_+} applied to u(x) = profile(x_n), via the angular reduction."""
    if not x_n > 0:
        raise ValueError("x_n must be positive")
    n, s = params.n, params.s
    p0 = float(np.asarray(profile(np.array([x_n])), dtype=float).ravel()[0])

    def pair(yn):
        yn = np.asarray(yn, dtype=float)
        return (p0 - profile(x_n + yn)) + (p0 - profile(np.maximum(x_n - yn, 0.0)))

    pref = 0.5 * normalization_constant(params) * x_n ** (2.0 * s - 2.0)
    return _evaluate(lambda lv: reduced_ball_integral(pair, n, x_n, s, lv), pref, quad, "half-space quadrature")


def boundary_limit_defect(domain: Domain, u: ScalarField, x, params: KernelParams,
                          quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """|L u(x) + Delta u(x)|: distance from the classical limit operator."""
    if u.hessian is None:
        raise ValueError("boundary_limit_defect needs a field with a Hessian")
    x = _point(domain, x)
    ev = apply_pointwise(domain, u, x, params, quad)
    lap = float(np.trace(u.hessian(x)))
    return abs(ev.value + lap)


def principal_value_form(domain: Domain, u: ScalarField, x, params: KernelParams,
                         eps: float = 1e-2, level: int = 4) -> float:
    """One-sided form C d^{2s-2} P.V. int (u(x) - u(x+y)) |y|^{-n-2s} dy.

    The principal value is taken over annuli eps*d < |y| < d with the full
    sphere of directions, then extrapolated eps -> 0 using the known
    eps^{2-2s} behaviour of the excluded ball.
    """
    x = _point(domain, x)
    n, s = params.n, params.s
    d = _check_interior(domain, x)
    axis = domain.boundary_direction(x)
    C = normalization_constant(params)
    u0 = float(u.eval(x[None, :])[0])
    m = order_for_level(level)
    if n == 1:
        omega, wo = np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    else:
        half, wh = sphere_directions(n, level, axis)
        if n == 2:
            omega, wo = np.vstack([half, -half]), np.concatenate([wh, wh]) / 2.0
        else:
            omega, wo = half, wh

    def annulus(e):
        edges = np.concatenate([d * e * 2.0 ** np.arange(0, int(np.ceil(np.log2(1.0 / e)))), [d]])
        edges = np.unique(np.clip(edges, d * e, d))
        outer = graded_edges(edges[-2], d, 4 * level, "b")
        edges = np.concatenate([edges[:-1], outer[1:]])
        r, wr = panel_rule(edges, m)
        wr = wr * r ** (-1.0 - 2.0 * s)
        y = (r[:, None, None] * omega[None, :, :]).reshape(-1, n)
        vals = (u0 - u.eval(x + y)).reshape(r.size, omega.shape[0])
        return C * d ** (2.0 * s - 2.0) * float(wr @ vals @ wo)

    beta = 2.0 - 2.0 * s
    I1, I2 = annulus(2.0 * eps), annulus(eps)
    return (2.0**beta * I2 - I1) / (2.0**beta - 1.0)


@dataclass
class DistanceBoundReport:
    max_abs: float
    bound: float
    passed: bool
    values: np.ndarray = field(repr=False)


def smoothed_distance_field(sd: SmoothedDistance) -> ScalarField:
    return ScalarField(lambda x: sd(x), sd.base.dim, support_note="C^{1,1}", name="delta")


def smoothed_distance_bound_check(domain: Domain, sd: SmoothedDistance, sample, params: KernelParams,
                                  quad: QuadratureSpec = DEFAULT_QUAD, u: ScalarField | None = None):
    """max |L delta| over the sample against n * Lip(grad delta).

    Pass ``u`` to check a different C^{1,1} field against the same bound.
    """
    field_ = smoothed_distance_field(sd) if u is None else u
    evals = apply_batch(domain, field_, sample, params, quad)
    vals = np.array([e.value for e in evals])
    slack = max((e.error_estimate for e in evals), default=0.0) + quad.abs_tol
    bound = params.n * sd.lipschitz_gradient
    mx = float(np.max(np.abs(vals))) if vals.size else 0.0
    return DistanceBoundReport(mx, bound, mx <= bound + slack, vals)
