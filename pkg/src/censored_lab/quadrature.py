"""Graded Gauss rules for weakly singular integrals over balls.

Everything here integrates functions of the form ``pair(y) |y|^{-n-2s}`` over a
ball, where ``pair`` is even in ``y`` and vanishes to second order at the
origin.  The radial variable is split into

* an inner cell ``[0, R/4]`` treated with a Gauss-Jacobi rule carrying the
  weight ``r^{1-2s}`` (so ``pair / r^2`` only has to be smooth there),
* a Legendre panel on ``[R/4, R/2]``,
* panels on ``[R/2, R]`` geometrically graded toward ``r = R``, where fields
  vanishing on the boundary of the domain are typically singular.

The angular variable is graded toward the poles of a chosen axis for the same
reason.  Refinement levels increase both the grading depth and the Gauss order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

INNER_FRACTION = 0.25
EPS = np.finfo(float).eps
DEPTH_PER_LEVEL = 4


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for the refinement loop.

    ``max_refinement_depth`` bounds the number of geometric grading cells placed
    toward a singular endpoint; each refinement level adds four.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_refinement_depth: int = 40

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_refinement_depth < 1:
            raise ValueError("max_refinement_depth must be >= 1")

    @property
    def max_level(self) -> int:
        return max(2, self.max_refinement_depth // DEPTH_PER_LEVEL)


DEFAULT_QUAD = QuadratureSpec()


class QuadratureError(ArithmeticError):
    """Refinement stopped before reaching the requested tolerance.

    The best available value and its error estimate are attached.
    """

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate!r}, error={error:.3e})")
        self.estimate = estimate
        self.error = error


def order_for_level(level: int) -> int:
    return 6 + 2 * level


@lru_cache(maxsize=None)
def gauss_legendre(m: int):
    x, w = special.roots_legendre(m)
    return x, w


@lru_cache(maxsize=None)
def gauss_jacobi_power(m: int, beta: float):
    """Nodes/weights on [0, 1] for the weight ``r**beta`` (beta > -1)."""
    x, w = special.roots_jacobi(m, 0.0, beta)
    r = 0.5 * (1.0 + x)
    return r, w * 0.5 ** (1.0 + beta)


def panel_rule(edges, m: int):
    """Composite Gauss-Legendre rule with ``m`` points on every panel."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(m)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x
    weights = half * w
    return nodes.ravel(), weights.ravel()


def graded_edges(a: float, b: float, depth: int, toward: str = "b", ratio: float = 0.5):
    """Panel edges on [a, b] shrinking geometrically toward one or both ends."""
    if toward == "both":
        mid = 0.5 * (a + b)
        left = graded_edges(a, mid, depth, "a", ratio)
        right = graded_edges(mid, b, depth, "b", ratio)
        return np.concatenate([left, right[1:]])
    L = b - a
    steps = ratio ** np.arange(depth + 1)
    if toward == "b":
        return np.concatenate([a + L * (1.0 - steps), [b]])
    if toward == "a":
        return np.concatenate([[a], (a + L * steps)[::-1]])
    raise ValueError(f"unknown grading direction {toward!r}")


def radial_rule(radius: float, s: float, level: int):
    """Rule for ``int_0^R D(r) r^{-1-2s} dr`` with ``D(r) = O(r^2)``.

    Returned weights already include the kernel ``r^{-1-2s}``.
    """
    m = order_for_level(level)
    depth = DEPTH_PER_LEVEL * level
    r_in = radius * INNER_FRACTION
    rj, wj = gauss_jacobi_power(m, 1.0 - 2.0 * s)
    inner_r = r_in * rj
    # r^{1-2s} (D/r^2): the Jacobi weight carries r^{1-2s}
    inner_w = wj * r_in ** (2.0 - 2.0 * s) / inner_r**2
    mid_edges = radius * np.array([INNER_FRACTION, 0.5])
    outer_edges = graded_edges(0.5 * radius, radius, depth, "b")
    edges = np.concatenate([mid_edges, outer_edges[1:]])
    r, w = panel_rule(edges, m)
    w = w * r ** (-1.0 - 2.0 * s)
    return np.concatenate([inner_r, r]), np.concatenate([inner_w, w])


def angular_rule(level: int):
    """Rule on [0, pi] graded toward both poles."""
    m = order_for_level(level)
    depth = DEPTH_PER_LEVEL * level
    return panel_rule(graded_edges(0.0, np.pi, depth, "both"), m)


def _orthonormal_frame(axis):
    """Columns: axis first, then an orthonormal completion."""
    axis = np.asarray(axis, dtype=float)
    n = axis.size
    q, _ = np.linalg.qr(np.column_stack([axis, np.eye(n)]))
    if q[:, 0] @ axis < 0:
        q = -q
    return q[:, :n]


def sphere_directions(n: int, level: int, axis=None):
    """Directions ``omega`` and weights with total weight ``|S^{n-1}|``.

    The integrands are even, so for n = 1, 2 only half of the sphere is
    sampled and the weights carry the factor 2.
    """
    if n == 1:
        return np.array([[1.0]]), np.array([2.0])
    if axis is None:
        axis = np.zeros(n)
        axis[-1] = 1.0
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    frame = _orthonormal_frame(axis)
    theta, wt = angular_rule(level)
    if n == 2:
        local = np.column_stack([np.cos(theta), np.sin(theta)])
        return local @ frame.T, 2.0 * wt
    if n == 3:
        nphi = 2 * order_for_level(level)
        phi = 2.0 * np.pi * np.arange(nphi) / nphi
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        local = np.stack([np.cos(th), np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph)], axis=-1)
        w = (wt[:, None] * np.sin(theta)[:, None] * (2.0 * np.pi / nphi)) * np.ones_like(ph)
        return local.reshape(-1, 3) @ frame.T, w.ravel()
    raise NotImplementedError("angular quadrature is implemented for n <= 3")


def ball_integral(pair: Callable, n: int, radius: float, s: float, level: int, axis=None) -> float:
    """``int_{B_radius} pair(y) |y|^{-n-2s} dy`` for an even ``pair = O(|y|^2)``.

    ``pair`` receives an array of shape (N, n) and returns N values.
    """
    r, wr = radial_rule(radius, s, level)
    omega, wo = sphere_directions(n, level, axis)
    if n == 1:
        y = r[:, None]
        return 2.0 * float(wr @ pair(y))
    y = (r[:, None, None] * omega[None, :, :]).reshape(-1, n)
    vals = pair(y).reshape(r.size, omega.shape[0])
    return float(wr @ vals @ wo)


def weight_mass(n: int, radius: float, s: float, level: int) -> float:
    """Root-sum-square of the ball rule weights.

    Independent rounding errors of size e in the integrand values produce an
    error of about e * weight_mass in the quadrature sum.
    """
    _, wr = radial_rule(radius, s, level)
    _, wo = sphere_directions(n, level)
    return float(np.sqrt(np.sum(wr**2) * np.sum(wo**2)))


def refine(evaluate: Callable[[int], float], quad: QuadratureSpec = DEFAULT_QUAD, what: str = "integral",
           floor: float = 0.0):
    """Run ``evaluate(level)`` on increasing levels until two agree.

    ``floor`` is the round-off level of one evaluation; differences below it
    count as converged and it bounds the reported error from below.
    Returns ``(value, error_estimate, level)``; raises QuadratureError when the
    depth budget is exhausted.
    """
    prev = evaluate(1)
    err = np.inf
    for level in range(2, quad.max_level + 1):
        cur = evaluate(level)
        err = abs(cur - prev)
        if err <= max(quad.abs_tol, quad.rel_tol * abs(cur), floor):
            return cur, max(err, floor), level
        prev = cur
    raise QuadratureError(f"{what} did not converge within depth {quad.max_refinement_depth}", prev, err)


def reduced_ball_integral(pair_of_yn: Callable, n: int, radius: float, s: float, level: int) -> float:
    """Same integral when the integrand depends on ``y_n`` only.

    Uses |S^{n-2}| int_0^R r^{-1-2s} int_0^pi pair(r cos theta) sin^{n-2} theta
    d theta dr for n >= 2 (a direct radial integral for n = 1).
    """
    r, wr = radial_rule(radius, s, level)
    if n == 1:
        return 2.0 * float(wr @ pair_of_yn(r))
    theta, wt = angular_rule(level)
    area = 2.0 * np.pi ** ((n - 1) / 2.0) / special.gamma((n - 1) / 2.0)
    wt = wt * np.sin(theta) ** (n - 2) * area
    vals = pair_of_yn(np.outer(r, np.cos(theta)).ravel()).reshape(r.size, theta.size)
    return float(wr @ vals @ wt)
