"""Super-solutions: the torsion paraboloid and the exterior-ball boundary barrier.

The boundary barrier lives in the normalised pose: boundary point x0 = 0,
inward normal e_n and exterior ball B_b(-b e_n).  A ``Frame`` maps physical
points into that pose.  With d_B(y) = |y + b e_n| - b,

    phi = (2 d_B - d_B^p) / r0,

where p < 2 makes -L(d_B^p) ~ d_B^{p-2} dominate the bounded curvature term
2 L(d_B) >= -2C/b close to the contact point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import Ball, Domain, DomainError, HalfSpace
from .fields import ScalarField, torsion
from .operator import apply_batch, apply_pointwise
from .quadrature import DEFAULT_QUAD, QuadratureSpec, _orthonormal_frame
from .special_fn import KernelParams, psi

EXPONENT_LEVELS = (1, 2, 3)  # p = 2 - 2^-k
R0_LEVELS = tuple(range(2, 12))  # r0 = 2^-k
CERTIFY_THRESHOLD = 0.9


class CertificationError(RuntimeError):
    """No grid parameter passed the sampled inequality."""


# -- torsion barrier ------------------------------------------------------------


@dataclass(frozen=True)
class TorsionBarrier:
    M: float
    n: int

    def field(self) -> ScalarField:
        return torsion(self.M, self.n)

    def check_sample(self, domain: Domain, pts: np.ndarray):
        if np.any(np.linalg.norm(pts, axis=-1) >= self.M):
            raise DomainError("torsion barrier needs Omega inside B_M")
        if np.any(domain.signed_distance(pts) <= 0):
            raise DomainError("sample points must be interior")


def torsion_field(M: float, n: int) -> ScalarField:
    return torsion(M, n)


# -- exterior-ball geometry -------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    """Boundary point ``x0`` and unit inward normal ``axis`` (the local e_n)."""

    x0: tuple
    axis: tuple

    @classmethod
    def standard(cls, n: int) -> "Frame":
        e = np.zeros(n)
        e[-1] = 1.0
        return cls(tuple(np.zeros(n)), tuple(e))

    @property
    def dim(self) -> int:
        return len(self.x0)

    def _Q(self):
        # columns: tangential directions, then the axis last
        a = np.asarray(self.axis, dtype=float)
        a = a / np.linalg.norm(a)
        q = _orthonormal_frame(a)
        return np.column_stack([q[:, 1:], q[:, 0]])

    def to_local(self, x):
        """(..., n) physical points to the normalised pose."""
        return (np.asarray(x, dtype=float) - np.asarray(self.x0)) @ self._Q()

    def to_physical(self, y):
        return np.asarray(y, dtype=float) @ self._Q().T + np.asarray(self.x0)


def exterior_ball_distance_power(b: float, p: float, n: int = 2) -> ScalarField:
    """(|y + b e_n| - b)^p in the barrier frame, with exact derivatives."""
    if not b > 0:
        raise ValueError("b must be positive")
    if p < 1:
        raise ValueError("p must be >= 1")
    e = np.zeros(n)
    e[-1] = b

    def parts(y):
        w = y + e
        r = np.linalg.norm(w, axis=-1)
        return w, r, np.maximum(_ball_gap(y, r, b), 0.0)

    def ev(y):
        return parts(y)[2] ** p

    def grad(y):
        w, r, d = parts(y)
        return (p * d ** (p - 1.0) / r)[..., None] * w

    def hess(y):
        w, r, d = parts(y)
        nu = w / r[..., None]
        outer = nu[..., :, None] * nu[..., None, :]
        eye = np.broadcast_to(np.eye(n), outer.shape)
        a = p * (p - 1.0) * d ** (p - 2.0)
        c = p * d ** (p - 1.0) / r
        return a[..., None, None] * outer + c[..., None, None] * (eye - outer)

    return ScalarField(ev, n, grad, hess, support_note=f"C^inf in U, C^{p} at the ball", name=f"d_B^{p}")


def _ball_gap(y, r, b):
    # |y + b e_n| - b without cancellation: (|y|^2 + 2 b y_n) / (|y + b e_n| + b)
    return (np.sum(y * y, axis=-1) + 2.0 * b * y[..., -1]) / (r + b)


def ball_distance(b: float, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    e = np.zeros(y.shape[-1])
    e[-1] = b
    return _ball_gap(y, np.linalg.norm(y + e, axis=-1), b)


def planar_direction(b: float, x) -> np.ndarray:
    """v_x = (x + b e_n) / |x + b e_n|."""
    x = np.asarray(x, dtype=float)
    e = np.zeros(x.shape[-1])
    e[-1] = b
    w = x + e
    return w / np.linalg.norm(w, axis=-1, keepdims=True)


def planar_distance(b: float, x, z) -> np.ndarray:
    """d_T(z) = (z + b e_n) . v_x - b: distance to the plane tangent to B_b facing x."""
    v = planar_direction(b, x)
    z = np.asarray(z, dtype=float)
    e = np.zeros(z.shape[-1])
    e[-1] = b
    return (z + e) @ v - b


def planar_distance_power(b: float, x, p: float) -> ScalarField:
    """The field z -> d_T(z)^p for the point x (only meaningful on B_{d_U(x)}(x))."""
    x = np.asarray(x, dtype=float)
    n = x.size
    return ScalarField(lambda z: np.maximum(planar_distance(b, x, z), 0.0) ** p, n, name=f"d_T^{p}")


def comparison_defect(b: float, x, z):
    """(d_B(z) - d_T(z), |(z - x)'|^2 / (2b)) for the pointwise comparison."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    v = planar_direction(b, x)
    dz = z - x
    tang = dz - (dz @ v)[..., None] * v
    return ball_distance(b, z) - planar_distance(b, x, z), np.sum(tang**2, axis=-1) / (2.0 * b)


@dataclass
class PlanarIdentity:
    operator_value: float
    psi_value: float
    t: float
    error_estimate: float

    @property
    def defect(self) -> float:
        # -L(d_T^p)(x) = psi(p, d_U/d_T) d_T^{p-2}
        return abs(-self.operator_value - self.psi_value)


def planar_identity(b: float, x, p: float, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD):
    """Both sides of -L_U(d_T^p)(x) = psi(p, d_U/d_T) d_T^{p-2} on the half space."""
    x = np.asarray(x, dtype=float)
    U = HalfSpace(x.size)
    dU = float(U.distance(x))
    dT = float(planar_distance(b, x, x))
    ev = apply_pointwise(U, planar_distance_power(b, x, p), x, params, quad)
    t = dU / dT
    return PlanarIdentity(ev.value, psi(p, t, params, quad) * dT ** (p - 2.0), t, ev.error_estimate)


# -- the boundary barrier ---------------------------------------------------------


@dataclass(frozen=True)
class ExteriorBallBarrier:
    b: float
    p: float
    r0: float
    frame: Frame

    def __post_init__(self):
        if not 1.0 <= self.p < 2.0:
            raise ValueError("barrier exponent must lie in [1, 2)")
        if not 0.0 < self.r0 < 0.5:
            raise ValueError("r0 must lie in (0, 1/2)")
        if not self.b > 0:
            raise ValueError("b must be positive")

    @property
    def n(self) -> int:
        return self.frame.dim

    def local_value(self, y):
        d = np.maximum(ball_distance(self.b, y), 0.0)
        return (2.0 * d - d**self.p) / self.r0

    def field(self) -> ScalarField:
        f = self.frame
        return ScalarField(lambda x: self.local_value(f.to_local(x)), self.n, name="barrier")

    def check_sample(self, domain: Domain, pts: np.ndarray):
        y = self.frame.to_local(pts)
        if np.any(np.linalg.norm(y, axis=-1) >= self.r0):
            raise DomainError(f"sample points must lie in U intersected with B_r0(x0), r0={self.r0}")
        if np.any(domain.signed_distance(pts) <= 0):
            raise DomainError("sample points must be interior")


def collar_sample(n: int, r0: float, n_depth: int = 10, n_tang: int = 5, frame: Optional[Frame] = None):
    """Fixed tensor layout in (distance, tangential offset) inside U and B_r0(x0).

    Depths are geometric in [r0/1000, 0.9 r0]; tangential offsets are
    uniform across the chord of B_r0 at that depth (one tangential coordinate;
    the rest are zero).  For n = 1 only depths are used.
    """
    frame = frame or Frame.standard(n)
    depths = r0 * np.geomspace(1e-3, 0.9, n_depth)
    if n == 1:
        y = depths[:, None]
    else:
        frac = np.linspace(-0.9, 0.9, n_tang)
        rows = []
        for t in depths:
            half = np.sqrt(max(r0**2 - t**2, 0.0))
            for f in frac:
                y = np.zeros(n)
                y[0] = f * half
                y[-1] = t
                rows.append(y)
        y = np.array(rows)
    return frame.to_physical(y)


@dataclass
class ExponentChoice:
    p: float
    worst_margin: float
    tried: list = field(default_factory=list)


def _neg_L(field_, U, pts, params, quad):
    evs = apply_batch(U, field_, pts, params, quad)
    return -np.array([e.value for e in evs]), max(e.error_estimate for e in evs)


def choose_exponent(b: float, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD,
                    collar: Optional[Sequence] = None, levels=EXPONENT_LEVELS) -> ExponentChoice:
    """Largest p = 2 - 2^-k with -L_U(d_B^p) >= d_B^{p-2} / 2 on the sample (U = half space)."""
    n = params.n
    if collar is None:
        collar = collar_sample(n, 0.25, n_depth=6)
    pts = np.asarray(collar, dtype=float)
    if pts.size == 0:
        raise ValueError("collar sample is empty")
    pts = pts.reshape(-1, n)
    U = HalfSpace(n)
    if np.any(U.signed_distance(pts) <= 0) or np.any(ball_distance(b, pts) > 1.0):
        raise DomainError("collar points must be interior with d_B <= 1")
    dB = ball_distance(b, pts)
    tried = []
    for k in sorted(levels, reverse=True):
        p = 2.0 - 2.0**-k
        f = exterior_ball_distance_power(b, p, n)
        lhs, err = _neg_L(f, U, pts, params, quad)
        margin = float(np.min(lhs / dB ** (p - 2.0) - 0.5))
        tried.append((p, margin))
        if margin >= -err:
            return ExponentChoice(p, margin, tried)
    raise CertificationError(
        f"no exponent in {[2 - 2.0**-k for k in levels]} satisfies -L(d^p) >= d^(p-2)/2 "
        f"(margins {tried}); tighten the quadrature or shrink the collar"
    )


def curvature_constant(b: float, params: KernelParams, collar: Sequence, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Measured C in L_U(d_B) >= -C / b (the p = 1 case): max(0, max -b L d_B)."""
    n = params.n
    pts = np.asarray(collar, dtype=float).reshape(-1, n)
    lhs, _ = _neg_L(exterior_ball_distance_power(b, 1.0, n), HalfSpace(n), pts, params, quad)
    return max(0.0, float(np.max(b * lhs)))


@dataclass
class CertificationReport:
    min_value: float
    threshold: float
    slack: float
    values: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.min_value >= self.threshold - self.slack

    @property
    def failures(self):
        bad = self.values < self.threshold - self.slack
        return list(zip(self.points[bad].tolist(), (self.values[bad] - self.threshold).tolist()))


def certify_barrier(domain: Domain, barrier, collar: Sequence, params: KernelParams,
                    quad: QuadratureSpec = DEFAULT_QUAD, threshold: float = 1.0,
                    slack: Optional[float] = None, workers: int = 1) -> CertificationReport:
    """min over the sample of L_Omega(barrier); passes iff min >= threshold - slack.

    Without an explicit slack the largest quadrature error estimate is used.
    """
    n = params.n
    pts = np.asarray(collar, dtype=float).reshape(-1, n)
    if pts.shape[0] == 0:
        raise ValueError("empty sample")
    barrier.check_sample(domain, pts)
    evs = apply_batch(domain, barrier.field(), pts, params, quad, workers)
    vals = np.array([e.value for e in evs])
    if slack is None:
        slack = max(e.error_estimate for e in evs)
    return CertificationReport(float(vals.min()), threshold, float(slack), vals, pts)


@dataclass
class BarrierProperties:
    value_at_x0: float
    min_on_shell: float
    min_on_closure: float
    ray_constant: float


def _ball_level_points(b: float, n: int, levels, reach: float, samples: int):
    """Points with d_B = level along directions in the (e_1, e_n) plane, kept inside B_reach."""
    alpha = np.linspace(-np.pi / 2, np.pi / 2, samples) if n > 1 else np.zeros(1)
    out = []
    for t in np.atleast_1d(levels):
        w = np.zeros((alpha.size, n))
        w[:, -1] = (b + t) * np.cos(alpha) - b
        if n > 1:
            w[:, 0] = (b + t) * np.sin(alpha)
        out.append(w[np.linalg.norm(w, axis=-1) <= reach])
    return np.vstack(out)


def barrier_properties(barrier: ExteriorBallBarrier, samples: int = 41) -> BarrierProperties:
    """Sampled checks in the local pose: phi(0) = 0; phi >= 1 on the shell
    {r0 <= d_B <= 2 r0} within B_{2 r0}; phi >= 0 on the closed collar; and the
    constant C in phi <= C d_U along the normal ray."""
    n, r0, b = barrier.n, barrier.r0, barrier.b
    v0 = float(barrier.local_value(np.zeros((1, n)))[0])
    shell = _ball_level_points(b, n, np.linspace(r0, 2 * r0, 9), 2 * r0, samples)
    closure = _ball_level_points(b, n, np.linspace(0.0, 2 * r0, 17), 2 * r0, samples)
    t = r0 * np.geomspace(1e-4, 1.0, samples)
    ray = np.zeros((t.size, n))
    ray[:, -1] = t
    return BarrierProperties(
        v0,
        float(np.min(barrier.local_value(shell))),
        float(np.min(barrier.local_value(closure))),
        float(np.max(barrier.local_value(ray) / t)),
    )


@dataclass
class BarrierBuild:
    barrier: ExteriorBallBarrier
    exponent: ExponentChoice
    certification: CertificationReport
    properties: BarrierProperties
    tried_r0: list


def build_boundary_barrier(b: float, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD,
                           p: Optional[float] = None, r0: Optional[float] = None,
                           threshold: float = CERTIFY_THRESHOLD, n_depth: int = 10, n_tang: int = 5,
                           frame: Optional[Frame] = None) -> BarrierBuild:
    """Barrier for U = half space: p from choose_exponent, r0 the largest 2^-k that certifies.

    ``p`` and ``r0`` override the searches.  Certification uses the fixed
    collar layout of ``collar_sample`` at each candidate r0.
    """
    n = params.n
    frame = frame or Frame.standard(n)
    if p is None:
        choice = choose_exponent(b, params, quad)
    else:
        choice = ExponentChoice(float(p), float("nan"))
    U = HalfSpace(n)
    candidates = [r0] if r0 is not None else [2.0**-k for k in R0_LEVELS]
    tried = []
    for rr in candidates:
        bar = ExteriorBallBarrier(b, choice.p, rr, frame)
        pts = collar_sample(n, rr, n_depth, n_tang, frame)
        rep = certify_barrier(U, bar, pts, params, quad, threshold=threshold, slack=0.0)
        tried.append((rr, rep.min_value))
        if rep.passed:
            return BarrierBuild(bar, choice, rep, barrier_properties(bar), tried)
    raise CertificationError(f"no r0 certified L phi >= {threshold} (tried {tried})")
