import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from censored_lab.barriers import (CertificationError, ExteriorBallBarrier, Frame, TorsionBarrier,
                                   barrier_properties, ball_distance, build_boundary_barrier, certify_barrier,
                                   collar_sample, comparison_defect, exterior_ball_distance_power,
                                   planar_distance, planar_identity)
from censored_lab.domain import Ball, DomainError, HalfSpace
from censored_lab.fields import hessian_fd_defect
from censored_lab.special_fn import KernelParams


def test_frame_round_trip():
    f = Frame(np.array([1.0, 2.0]), np.array([0.6, 0.8]))
    x = np.array([[0.3, -0.4], [2.0, 1.0]])
    assert np.allclose(f.to_physical(f.to_local(x)), x)
    assert np.allclose(f.to_local(np.array([1.6, 2.8])), [0.0, 1.0])


def test_ball_distance_is_stable_near_tangency():
    y = np.array([[1e-9, 1e-12], [0.0, 0.5]])
    naive = np.linalg.norm(y + [0.0, 1.0], axis=1) - 1.0
    d = ball_distance(1.0, y)
    assert d[1] == pytest.approx(0.5) and d[0] == pytest.approx(1e-12 + 0.5e-18, rel=1e-6)
    assert abs(naive[0] - d[0]) > 0  # the naive formula loses it


def test_distance_power_derivatives():
    u = exterior_ball_distance_power(1.0, 1.75, 2)
    assert hessian_fd_defect(u, np.array([0.1, 0.2])) < 1e-5


@settings(max_examples=200, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(1e-3, 1.0), st.floats(0.0, 2 * np.pi), st.floats(0.0, 0.999),
       st.floats(0.2, 5.0))
def test_comparison_inequality(x1, x2, th, rho, b):
    x = np.array([x1, x2])
    z = x + rho * x2 * np.array([np.cos(th), np.sin(th)])
    diff, bound = comparison_defect(b, x, z)
    assert -1e-12 <= diff <= bound + 1e-12


def test_planar_distance_touches_ball():
    x = np.array([0.3, 0.4])
    v = (x + [0, 1]) / np.linalg.norm(x + [0, 1])
    foot = -np.array([0, 1.0]) + v  # the tangency point on the unit ball
    assert planar_distance(1.0, x, foot) == pytest.approx(0.0, abs=1e-14)


def test_planar_identity_defect_small():
    rep = planar_identity(1.0, np.array([0.2, 0.3]), 1.5, KernelParams(2, 0.4))
    assert rep.defect < 1e-8 and 0 < rep.t <= 1


def test_barrier_validation_and_properties():
    for bad in ({"p": 2.0}, {"p": 0.5}, {"r0": 0.5}, {"b": 0.0}):
        kw = {"b": 1.0, "p": 1.5, "r0": 0.25, "frame": Frame.standard(2), **bad}
        with pytest.raises(ValueError):
            ExteriorBallBarrier(**kw)
    bar = ExteriorBallBarrier(1.0, 1.875, 0.25, Frame.standard(2))
    props = barrier_properties(bar)
    assert props.value_at_x0 == 0.0 and props.min_on_shell > 0 and props.min_on_closure >= 0
    with pytest.raises(DomainError):
        bar.check_sample(HalfSpace(2), np.array([[0.0, 0.3]]))


def test_collar_layout():
    pts = collar_sample(2, 0.25, 10, 5)
    assert len(pts) == 50
    assert all(0 < p[1] < 0.25 and np.linalg.norm(p) < 0.25 for p in pts)


def test_build_barrier_1d_and_failure():
    build = build_boundary_barrier(1.0, KernelParams(1, 0.5))
    assert build.certification.passed and build.certification.min_value >= 0.9
    with pytest.raises(CertificationError):
        build_boundary_barrier(1.0, KernelParams(1, 0.5), p=1.5, r0=0.25, threshold=50.0)


def test_torsion_barrier_certifies_on_ball():
    P = KernelParams(2, 0.5)
    B = Ball.unit(2)
    tb = TorsionBarrier(1.0, 2)
    rep = certify_barrier(B, tb, [np.array([0.2, 0.1]), np.array([0.0, 0.9])], P, threshold=1.0)
    assert rep.passed and rep.min_value == pytest.approx(1.0, abs=1e-8)
