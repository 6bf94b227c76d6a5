"""Exact-oracle suite: quantities with known values, each with a tolerance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .domain import Ball, HalfSpace, Interval
from .fields import affine, monomial, rescaled, sine, torsion, translated
from .operator import apply_pointwise
from .special_fn import KernelParams, a_coeff, normalization_constant, normalization_integral, psi


@dataclass
class Check:
    name: str
    defect: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.defect <= self.tolerance)


def _normalization():
    worst = 0.0
    for n in (1, 2, 3):
        for s in (0.25, 0.5, 0.75):
            P = KernelParams(n, s)
            worst = max(worst, abs(normalization_constant(P) * normalization_integral(P)[0] - 1.0))
    return worst


def _psi_two():
    P = KernelParams(2, 0.5)
    return max(abs(psi(2.0, t, P) - 2.0) for t in (0.25, 0.5, 1.0))


def _a_values():
    P = KernelParams(1, 0.5)
    exact = {0.0: 0.0, 1.0: 0.0, 2.0: -2.0, 3.0: -6.0}
    return max(abs(a_coeff(p, P) - v) for p, v in exact.items())


def _torsion(n):
    P = KernelParams(n, 0.5)
    B = Ball.unit(n)
    pts = [np.full(n, 0.1), np.full(n, 0.3 / np.sqrt(n)), np.r_[np.zeros(n - 1), 0.9]]
    return max(abs(apply_pointwise(B, torsion(1.0, n), x, P).value - 1.0) for x in pts)


def _affine():
    P = KernelParams(2, 0.5)
    u = affine([1.5, -2.0], 0.3)
    return max(abs(apply_pointwise(Ball.unit(2), u, x, P).value) for x in ([0.2, 0.1], [-0.5, 0.6]))


def _monomial():
    # L x_n^3 = a(3) x_n on the half space
    P = KernelParams(2, 0.5)
    x = np.array([0.3, 0.7])
    return abs(apply_pointwise(HalfSpace(2), monomial(3.0, 2), x, P).value - (-6.0) * x[1])


def _translation():
    # L_{Omega + z}(u(. - z))(x + z) = L_Omega u(x)
    P = KernelParams(2, 0.5)
    z = np.array([0.7, -1.2])
    u = sine(2)
    x = np.array([0.2, 0.4])
    a = apply_pointwise(Ball.unit(2), u, x, P).value
    b = apply_pointwise(Ball(tuple(z), 1.0), translated(u, -z), x + z, P).value
    return abs(a - b)


def _scaling():
    # L_{r Omega}(u(. / r))(r x) = r^-2 L_Omega u(x)
    P = KernelParams(1, 0.75)
    r = 2.5
    u = sine(1)
    x = np.array([0.15])
    a = apply_pointwise(Interval(-0.5, 0.5), u, x, P).value
    b = apply_pointwise(Interval(-0.5 * r, 0.5 * r), rescaled(u, 1.0 / r), r * x, P).value
    return abs(b - a / r**2)


SUITE: List[tuple] = [
    ("normalization C*I = 1", _normalization, 1e-10),
    ("psi(2; t) = 2", _psi_two, 1e-8),
    ("a(0..3) = 0 0 -2 -6", _a_values, 1e-8),
    ("torsion n=1", lambda: _torsion(1), 1e-6),
    ("torsion n=2", lambda: _torsion(2), 1e-6),
    ("affine harmonic", _affine, 1e-8),
    ("half-space monomial p=3", _monomial, 1e-8),
    ("translation identity", _translation, 1e-8),
    ("scaling identity", _scaling, 1e-8),
]


def run_suite(selected: Callable[[str], bool] = lambda name: True) -> List[Check]:
    return [Check(name, float(fn()), tol) for name, fn, tol in SUITE if selected(name)]
