import numpy as np
import pytest

from censored_lab.analysis import (Profile, distance_bounds, fit_boundary_expansion, harnack_quotient,
                                   liouville_linearity_check, oscillation_contraction, weighted_l1_norm,
                                   window_for)
from censored_lab.domain import Ball, HalfSpace, Interval
from censored_lab.fields import ScalarField
from censored_lab.solver import assemble, make_grid, solve_dirichlet
from censored_lab.special_fn import KernelParams


def test_fit_recovers_exponent():
    d = np.geomspace(1e-3, 0.1, 30)
    rep = fit_boundary_expansion(Profile(d, 0.5 + 2.0 * d**0.35))
    assert rep.alpha_hat == pytest.approx(0.35) and rep.c0 == pytest.approx(0.5, abs=1e-10)
    assert rep.K == pytest.approx(2.0)


def test_fit_degenerate_and_too_short():
    d = np.geomspace(1e-3, 0.1, 30)
    assert fit_boundary_expansion(Profile(d, np.full(30, 0.7))).alpha_hat is None
    with pytest.raises(ValueError):
        fit_boundary_expansion(Profile(d[:5], d[:5]))
    with pytest.raises(ValueError):
        fit_boundary_expansion(Profile(np.linspace(0.05, 0.1, 20), np.ones(20)))


def test_oscillation_on_samples_and_harnack():
    x = np.geomspace(1e-5, 1.0, 400)
    u = x + x**1.5
    seq = oscillation_contraction(None, levels=5, samples=(x, u))
    assert np.allclose(seq.ratios, 0.5, atol=0.02) and np.all(seq.gaps > 0)
    assert harnack_quotient(x, u) == pytest.approx(2.0 / (1.0 + 1e-5**0.5), rel=1e-12)
    with pytest.raises(ValueError):
        oscillation_contraction(lambda t: -t)


def test_liouville_detects_nonlinearity():
    x = np.linspace(0.1, 2, 20)
    assert liouville_linearity_check(x, 3 * x).deviation < 1e-15
    assert liouville_linearity_check(x, x + 0.1 * x**2).deviation > 1e-2


def test_window_spans_a_decade():
    lo, hi = window_for(0.05, 0.5)
    assert hi == 0.125 and hi / lo >= 10


def test_distance_bounds_on_interval():
    I = Interval(-0.5, 0.5)
    u, _ = solve_dirichlet(assemble(I, make_grid(I, 4), KernelParams(1, 0.5)), 1.0, 0.0)
    c, C = distance_bounds(u)
    assert 0.2 < c <= C < 0.55


def test_weighted_l1_norm():
    one = ScalarField(lambda y: np.ones(y.shape[:-1]), 1)
    # int_0^1 dy / (1 + y^2) = pi / 4
    assert weighted_l1_norm(one, Interval(0.0, 1.0), 1.0) == pytest.approx(np.pi / 4, rel=1e-9)
    decay = ScalarField(lambda y: np.exp(-np.sum(y * y, axis=-1)), 2)
    H = HalfSpace(2)
    n1, n2 = weighted_l1_norm(decay, H, 0.5), weighted_l1_norm(decay, H, 1.5)
    assert 0 < n2 <= 2 * n1
    disc = weighted_l1_norm(ScalarField(lambda y: np.ones(y.shape[:-1]), 2), Ball.unit(2), 2.0)
    assert disc == pytest.approx(np.pi**2 / 4, rel=1e-8)
    with pytest.raises(ValueError):
        weighted_l1_norm(decay, HalfSpace(3), 1.0)
