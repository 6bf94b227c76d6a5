import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from censored_lab.domain import Ball, HalfLineSection, HalfSpace, Interval, SmoothedDistance
from censored_lab.fields import affine, monomial, quadratic, sine, torsion
from censored_lab.operator import (BoundaryProximityWarning, apply_batch, apply_halfspace_1d, apply_pointwise,
                                   boundary_limit_defect, principal_value_form, smoothed_distance_bound_check)
from censored_lab.quadrature import QuadratureError, QuadratureSpec
from censored_lab.special_fn import KernelParams, a_coeff


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.0, 2 * np.pi), st.floats(0.1, 0.9))
def test_torsion_is_one_everywhere(r, t, s):
    P = KernelParams(2, s)
    x = r * np.array([np.cos(t), np.sin(t)])
    assert apply_pointwise(Ball.unit(2), torsion(1.0, 2), x, P).value == pytest.approx(1.0, abs=1e-8)


def test_quadratic_gives_minus_laplacian():
    # L |x|^2 = -2n exactly, on any domain
    P = KernelParams(3, 0.3)
    assert apply_pointwise(Ball.unit(3), quadratic(3), [0.1, 0.2, -0.3], P).value == pytest.approx(-6.0, abs=1e-8)


def test_halfspace_monomials():
    P = KernelParams(2, 0.5)
    for p in (1.5, 2.5):
        x = np.array([0.2, 0.6])
        val = apply_pointwise(HalfSpace(2), monomial(p, 2), x, P).value
        assert val == pytest.approx(a_coeff(p, P) * 0.6 ** (p - 2), rel=1e-8)
        red = apply_halfspace_1d(lambda t: np.maximum(t, 0.0) ** p, 0.6, P).value
        assert red == pytest.approx(val, rel=1e-8)
    assert apply_pointwise(HalfLineSection(2), monomial(2.0, 1), 0.6, P).value == pytest.approx(-2.0, abs=1e-8)


def test_batch_matches_pointwise_and_is_ordered():
    P = KernelParams(1, 0.5)
    pts = [[-0.3], [0.0], [0.2]]
    one = [apply_pointwise(Interval(-0.5, 0.5), sine(1), p, P).value for p in pts]
    many = apply_batch(Interval(-0.5, 0.5), sine(1), pts, P, workers=3)
    assert [e.value for e in many] == one


def test_preconditions():
    P = KernelParams(2, 0.5)
    with pytest.raises(ValueError):
        apply_pointwise(Ball.unit(2), sine(2), [1.0, 0.0], P)
    with pytest.raises(ValueError):
        apply_pointwise(Ball.unit(2), sine(2), [0.1], P)
    with pytest.raises(ValueError):
        apply_pointwise(Interval(-1, 1), sine(1), [0.1], P)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        apply_pointwise(Interval(-1, 1), affine([1.0]), [1.0 - 1e-8], KernelParams(1, 0.5))
    assert any(issubclass(x.category, BoundaryProximityWarning) for x in w)


def test_non_convergence_raises():
    P = KernelParams(1, 0.5)
    rough = monomial(0.5, 1)
    with pytest.raises(QuadratureError):
        apply_pointwise(Interval(-1, 1), rough, [1e-3], P, QuadratureSpec(max_refinement_depth=4))


def test_limit_and_principal_value_forms():
    P = KernelParams(2, 0.5)
    B = Ball.unit(2)
    x = np.array([0.1, -0.2])
    assert boundary_limit_defect(B, torsion(1.0, 2), x, P) < 1e-8
    assert principal_value_form(B, sine(2), x, P) == pytest.approx(apply_pointwise(B, sine(2), x, P).value, rel=1e-4)


def test_smoothed_distance_bound():
    # delta is only C^{1,1}, so quadrature converges slowly; 1e-6 suffices for a bound
    loose = QuadratureSpec(1e-6, 1e-6)
    sd = SmoothedDistance(Interval(-0.5, 0.5), 0.2)
    pts = [[v] for v in np.linspace(-0.45, 0.45, 7)]
    rep = smoothed_distance_bound_check(Interval(-0.5, 0.5), sd, pts, KernelParams(1, 0.5), loose)
    assert rep.passed and rep.max_abs <= rep.bound
