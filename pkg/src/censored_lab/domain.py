"""Domains with exact distance-to-boundary and the smoothed distance.

Points are numpy arrays whose last axis is the spatial dimension; for the
one-dimensional kinds (``Interval``, ``HalfLineSection``) plain scalars are
accepted as well.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CLOSURE_TOL = 1e-12


class DomainError(ValueError):
    """A point violates a domain precondition (outside the closure, not on the boundary, ...)."""


@dataclass(frozen=True)
class GeometryConstants:
    diameter: Optional[float]
    inradius: float

    @property
    def bounded(self) -> bool:
        return self.diameter is not None


class Domain:
    """Base class; subclasses provide ``dim``, ``_dist`` and ``_nearest``."""

    dim: int
    kind: str = "domain"

    def as_points(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.dim:
            raise DomainError(f"{self.kind}: expected points of dimension {self.dim}, got shape {x.shape}")
        return x

    def signed_distance(self, x):
        """Distance to the boundary, negative outside the domain (no checks)."""
        return self._dist(self.as_points(x))

    def distance(self, x):
        d = self.signed_distance(x)
        scale = CLOSURE_TOL * (1.0 + np.max(np.abs(np.asarray(x, dtype=float)), initial=0.0))
        if np.any(d < -scale):
            raise DomainError(f"point(s) outside the closure of {self!r}")
        d = np.maximum(d, 0.0)
        return float(d) if np.ndim(d) == 0 else d

    def nearest_boundary_point(self, x):
        return self._nearest(self.as_points(x))

    def boundary_direction(self, x):
        """Unit vector pointing from ``x`` to its nearest boundary point."""
        x = self.as_points(x)
        v = self.nearest_boundary_point(x) - x
        nrm = np.linalg.norm(v, axis=-1, keepdims=True)
        return v / np.where(nrm > 0, nrm, 1.0)

    def inward_normal(self, z):
        z = self.as_points(z)
        d = np.abs(self.signed_distance(z))
        if np.any(d > 1e-9 * (1.0 + np.max(np.abs(z)))):
            raise DomainError("inward_normal requires boundary points")
        return self._normal(z)

    def contains(self, x) -> np.ndarray:
        return self.signed_distance(x) > 0

    def geometry_constants(self) -> GeometryConstants:
        raise NotImplementedError


@dataclass(frozen=True)
class Interval(Domain):
    a: float
    b: float
    kind: str = field(default="interval", init=False, repr=False)

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError(f"Interval requires a < b, got ({self.a}, {self.b})")

    @property
    def dim(self) -> int:
        return 1

    def _dist(self, x):
        return np.minimum(x[..., 0] - self.a, self.b - x[..., 0])

    def _nearest(self, x):
        mid = 0.5 * (self.a + self.b)
        return np.where(x < mid, self.a, self.b)

    def _normal(self, z):
        mid = 0.5 * (self.a + self.b)
        return np.where(z < mid, 1.0, -1.0)

    def geometry_constants(self):
        return GeometryConstants(self.b - self.a, 0.5 * (self.b - self.a))


@dataclass(frozen=True)
class Ball(Domain):
    center: tuple
    radius: float
    kind: str = field(default="ball", init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise DomainError(f"Ball requires radius > 0, got {self.radius}")

    @classmethod
    def unit(cls, dim: int, radius: float = 1.0):
        return cls((0.0,) * dim, radius)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def c(self):
        return np.array(self.center)

    def _dist(self, x):
        return self.radius - np.linalg.norm(x - self.c, axis=-1)

    def _nearest(self, x):
        v = x - self.c
        nrm = np.linalg.norm(v, axis=-1, keepdims=True)
        e = np.zeros(self.dim)
        e[-1] = 1.0
        u = np.where(nrm > 0, v / np.where(nrm > 0, nrm, 1.0), e)
        return self.c + self.radius * u

    def _normal(self, z):
        return (self.c - z) / self.radius

    def geometry_constants(self):
        return GeometryConstants(2.0 * self.radius, self.radius)


@dataclass(frozen=True)
class HalfSpace(Domain):
    """{x_n > 0} in R^dim."""

    ndim: int
    kind: str = field(default="halfspace", init=False, repr=False)

    def __post_init__(self):
        if self.ndim < 1:
            raise DomainError("HalfSpace dimension must be >= 1")

    @property
    def dim(self) -> int:
        return self.ndim

    def _dist(self, x):
        return x[..., -1]

    def _nearest(self, x):
        z = np.array(x, copy=True)
        z[..., -1] = 0.0
        return z

    def _normal(self, z):
        e = np.zeros(z.shape)
        e[..., -1] = 1.0
        return e

    def geometry_constants(self):
        return GeometryConstants(None, np.inf)


@dataclass(frozen=True)
class HalfLineSection(Domain):
    """The half space R^n_+ seen through profiles u(x_n); points are the scalar x_n.

    ``ndim`` is the ambient dimension n entering the kernel.
    """

    ndim: int = 1
    kind: str = field(default="halfline", init=False, repr=False)

    @property
    def dim(self) -> int:
        return 1

    def _dist(self, x):
        return x[..., 0]

    def _nearest(self, x):
        return np.zeros_like(x)

    def _normal(self, z):
        return np.ones_like(z)

    def geometry_constants(self):
        return GeometryConstants(None, np.inf)


def distance(domain: Domain, x):
    return domain.distance(x)


def inward_normal(domain: Domain, z):
    return domain.inward_normal(z)


def geometry_constants(domain: Domain) -> GeometryConstants:
    return domain.geometry_constants()


def kernel_dimension(domain: Domain) -> int:
    """Dimension n of the kernel |y|^{-n-2s} associated with the domain."""
    if isinstance(domain, HalfLineSection):
        return domain.ndim
    return domain.dim


# -- smoothed distance ------------------------------------------------------
#
# delta = d0 * chi(d / d0) with
#   chi(t) = t                              on [0, 1]
#   chi(t) = 1 + tau - tau^2 + tau^3 / 3    on [1, 2], tau = t - 1
#   chi(t) = 4/3                            on [2, inf)
# so chi' = (1 - tau)^2 on the blend, chi'' in [-2, 0]: chi is C^{1,1}.

CAP = 4.0 / 3.0


def _chi(t):
    t = np.asarray(t, dtype=float)
    tau = np.clip(t - 1.0, 0.0, 1.0)
    blend = 1.0 + tau - tau**2 + tau**3 / 3.0
    return np.where(t <= 1.0, t, np.where(t >= 2.0, CAP, blend))


def _chi_prime(t):
    t = np.asarray(t, dtype=float)
    tau = np.clip(t - 1.0, 0.0, 1.0)
    return np.where(t <= 1.0, 1.0, (1.0 - tau) ** 2)


@dataclass(frozen=True)
class SmoothedDistance:
    base: Domain
    d0: float

    def __post_init__(self):
        if not self.d0 > 0:
            raise DomainError("d0 must be positive")
        g = self.base.geometry_constants()
        if g.bounded and 2.0 * self.d0 > g.inradius:
            # the cap must be reached before the ridge of d (midpoint / centre)
            raise DomainError(f"d0={self.d0} too large: need 2*d0 <= inradius={g.inradius}")

    def __call__(self, x):
        return self.d0 * _chi(self.base.distance(x) / self.d0)

    def gradient(self, x):
        x = self.base.as_points(x)
        d = self.base.distance(x)
        return (_chi_prime(d / self.d0))[..., None] * (-self.base.boundary_direction(x))

    @property
    def lipschitz_gradient(self) -> float:
        """Upper bound for the Lipschitz constant of grad(delta) on the closure."""
        bound = 2.0 / self.d0  # from |chi''| <= 2
        if isinstance(self.base, Ball):
            # curvature of the level sets of d: chi'(t) / (R - d0 t)
            t = np.linspace(0.0, 2.0, 4001)
            bound = max(bound, float(np.max(_chi_prime(t) / (self.base.radius - self.d0 * t))))
        return bound


def smoothed_distance(sd: SmoothedDistance, x):
    return sd(x)
