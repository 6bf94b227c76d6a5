import numpy as np
import pytest

from censored_lab.quadrature import (QuadratureError, QuadratureSpec, ball_integral, graded_edges, panel_rule,
                                     reduced_ball_integral, refine)


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(max_refinement_depth=0)


def test_panel_rule_integrates_polynomials():
    x, w = panel_rule(graded_edges(0.0, 1.0, 6, "b"), 5)
    assert w @ x**7 == pytest.approx(1 / 8, rel=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ball_integral_of_radial_square(n):
    # int_{B_1} |y|^2 |y|^{-n-2s} dy = |S| / (2 - 2s)
    s = 0.35
    area = {1: 2.0, 2: 2 * np.pi, 3: 4 * np.pi}[n]
    val = ball_integral(lambda y: np.sum(y * y, axis=1), n, 1.0, s, 3)
    assert val == pytest.approx(area / (2 - 2 * s), rel=1e-12)


def test_reduced_matches_full_ball():
    s = 0.6
    full = ball_integral(lambda y: y[:, -1] ** 2, 3, 0.7, s, 3)
    red = reduced_ball_integral(lambda yn: yn**2, 3, 0.7, s, 3)
    assert red == pytest.approx(full, rel=1e-12)


def test_refine_reports_failure():
    with pytest.raises(QuadratureError) as exc:
        refine(lambda lv: 1.0 / lv, QuadratureSpec(max_refinement_depth=8))
    assert np.isfinite(exc.value.estimate)
    val, err, level = refine(lambda lv: 2.0 + 10.0**-(4 * lv))
    assert val == pytest.approx(2.0) and err <= 1e-10 and level >= 2
