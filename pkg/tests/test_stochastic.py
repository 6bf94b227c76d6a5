import numpy as np
import pytest

from censored_lab.domain import Ball, DomainError, HalfSpace, Interval
from censored_lab.fields import constant
from censored_lab.solver import assemble, make_grid, solve_dirichlet
from censored_lab.special_fn import KernelParams
from censored_lab.stochastic import (JumpConfig, PathStats, compensation_integral, cross_validate,
                                     diffusion_coefficient, estimate_solution, jump_intensity, sample_jump)


def test_config_validation():
    for kw in ({"epsilon": 0.0}, {"epsilon": 1.0}, {"boundary_layer": -1.0}, {"max_steps": 0}, {"c_dt": 0.0}):
        with pytest.raises(ValueError):
            JumpConfig(**kw)
    assert JumpConfig().layer(Interval(0.0, 2.0)) == pytest.approx(1e-4)
    with pytest.raises(DomainError):
        JumpConfig().layer(HalfSpace(1))
    with pytest.raises(ValueError):
        PathStats(0.0, -1.0, 1, 0.0, 0.0)


@pytest.mark.parametrize("n,s", [(1, 0.3), (2, 0.5), (3, 0.8)])
def test_small_jumps_compensate_to_laplacian(n, s):
    val, _ = compensation_integral(KernelParams(n, s), 0.05, 0.7)
    assert val == pytest.approx(diffusion_coefficient(s, 0.05), rel=1e-9)


def test_jump_sampler_support_and_intensity():
    rng = np.random.default_rng(0)
    P = KernelParams(2, 0.5)
    y = sample_jump(np.zeros(2), 0.4, P, rng, epsilon=0.1, size=5000)
    r = np.linalg.norm(y, axis=1)
    assert r.min() >= 0.04 - 1e-12 and r.max() <= 0.4 + 1e-12
    # rho^{-2} on [0.04, 0.4]: median radius 2 a b / (a + b)
    assert np.median(r) == pytest.approx(2 * 0.04 * 0.4 / 0.44, rel=0.05)
    assert jump_intensity(P, 0.1) > jump_intensity(P, 0.2) > 0
    with pytest.raises(ValueError):
        sample_jump(np.zeros(2), 0.0, P, rng)


def test_estimate_independent_of_workers():
    I = Interval(-0.5, 0.5)
    P = KernelParams(1, 0.5)
    cfg = JumpConfig(seed=3)
    a = estimate_solution(I, constant(1.0, 1), [0.1], 5000, cfg, P, workers=1)
    b = estimate_solution(I, constant(1.0, 1), [0.1], 5000, cfg, P, workers=3)
    assert a == b
    assert abs(a.estimate - (0.25 - 0.01) / 2) < 4 * a.std_error
    assert not a.flagged and a.mean_exit_time > 0


def test_truncation_is_reported():
    st = estimate_solution(Interval(-0.5, 0.5), constant(1.0, 1), [0.0], 200, JumpConfig(max_steps=3),
                           KernelParams(1, 0.5))
    assert st.truncated > 150 and st.flagged


def test_preconditions():
    with pytest.raises(DomainError):
        estimate_solution(Ball.unit(2), constant(1.0, 2), [1.0, 0.0], 10, JumpConfig(), KernelParams(2, 0.5))
    with pytest.raises(ValueError):
        estimate_solution(Ball.unit(2), constant(1.0, 2), [0.0, 0.0], 0, JumpConfig(), KernelParams(2, 0.5))


def test_cross_validation_against_solver():
    I = Interval(-0.5, 0.5)
    P = KernelParams(1, 0.5)
    u, _ = solve_dirichlet(assemble(I, make_grid(I, 4), P), 1.0, 0.0)
    cv = cross_validate(I, constant(1.0, 1), [[-0.2], [0.3]], 8000, JumpConfig(seed=5), P, u, workers=2)
    assert cv.passed and cv.z.shape == (2,)
