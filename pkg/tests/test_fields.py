import numpy as np
import pytest

from censored_lab.fields import (affine, from_selector, hessian_fd_defect, monomial, quadratic, rescaled, sine,
                                 torsion, translated)


@pytest.mark.parametrize("u", [torsion(1.0, 2), quadratic(3), affine([1.0, -2.0], 0.5), monomial(2.5, 2), sine(2)])
def test_hessians_match_finite_differences(u):
    x = np.full(u.dim, 0.4)
    assert hessian_fd_defect(u, x) < 1e-6


def test_algebra_and_transforms():
    u, v = torsion(1.0, 2), quadratic(2)
    x = np.array([[0.3, 0.1]])
    assert np.allclose((u + v.scaled(0.25))(x), 0.25)
    assert np.allclose(translated(sine(2), [1.0, 0.0])(x), np.sin(1.3))
    assert np.allclose(rescaled(sine(1), 2.0)(np.array([0.3])), np.sin(0.6))


def test_selector_catalog():
    assert from_selector("torsion", 1, M=0.5)(0.0) == pytest.approx(0.125)
    assert from_selector("one", 2)(np.zeros(2)) == 1.0
    with pytest.raises(KeyError):
        from_selector("nope", 1)
    with pytest.raises(ValueError):
        torsion(0.0, 1)
