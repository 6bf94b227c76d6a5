"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import os

import numpy as np

from censored_lab import cli
from censored_lab.analysis import (boundary_quotient_profile, default_window, discrete_harmonic_profile,
                                   distance_bounds, fit_boundary_expansion, liouville_linearity_check,
                                   oscillation_contraction)
from censored_lab.barriers import build_boundary_barrier, comparison_defect, planar_identity
from censored_lab.domain import Ball, Interval
from censored_lab.fields import ScalarField, affine, constant, rescaled, sine, torsion, translated
from censored_lab.operator import apply_pointwise
from censored_lab.solver import assemble, convergence_study, make_grid, solve_dirichlet
from censored_lab.special_fn import KernelParams, a_coeff, normalization_constant, normalization_integral, psi
from censored_lab.stochastic import JumpConfig, estimate_solution

WORKERS = min(4, os.cpu_count() or 1)


def _ball_points(rng, n, count, reach=0.999):
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * reach * rng.random((count, 1)) ** (1.0 / n)


def test_01_normalization(record):
    worst = 0.0
    for n in (1, 2, 3):
        for s in (0.25, 0.5, 0.75):
            P = KernelParams(n, s)
            C = normalization_constant(P)
            for r in (0.5, 1.0, 2.0):
                val, _ = normalization_integral(P, r)
                worst = max(worst, abs(C * val - 1.0))
    ok = worst <= 1e-10
    record(1, "normalization C_{n,s} = 1 / integral form", ok, f"max rel defect {worst:.2e} <= 1e-10")
    assert ok


def test_02_special_values(record):
    P = KernelParams(2, 0.5)
    psi_def = max(abs(psi(2.0, t, P) - 2.0) for t in np.round(np.arange(1, 11) * 0.1, 1))
    P1 = KernelParams(1, 0.5)
    a_def = max(abs(a_coeff(p, P1) - v) for p, v in ((0.0, 0.0), (1.0, 0.0), (2.0, -2.0), (3.0, -6.0)))
    ok = psi_def <= 1e-8 and a_def <= 1e-8
    record(2, "psi(2,t) = 2 and a(0..3) = 0, 0, -2, -6", ok, f"psi defect {psi_def:.2e}, a defect {a_def:.2e}")
    assert ok


def test_03_torsion_oracle(record):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for n in (1, 2):
        P = KernelParams(n, 0.5)
        B = Ball.unit(n)
        u = torsion(1.0, n)
        for x in _ball_points(rng, n, 20):
            worst = max(worst, abs(apply_pointwise(B, u, x, P).value - 1.0))
    ok = worst <= 1e-6
    record(3, "L phi^(1) = 1 at 20 random points of Ball(0,1,n), n = 1, 2", ok, f"max |L phi - 1| {worst:.2e}")
    assert ok


def test_04_affine_scaling_translation(record):
    rng = np.random.default_rng(4)
    aff = tr = sc = 0.0
    for s in (0.3, 0.7):
        P2 = KernelParams(2, s)
        B = Ball.unit(2)
        for x in _ball_points(rng, 2, 5, 0.95):
            u = affine(rng.normal(size=2), rng.normal())
            aff = max(aff, abs(apply_pointwise(B, u, x, P2).value))
            z = rng.normal(size=2)
            a = apply_pointwise(B, sine(2), x, P2).value
            b = apply_pointwise(Ball(tuple(z), 1.0), translated(sine(2), -z), x + z, P2).value
            tr = max(tr, abs(a - b))
        P1 = KernelParams(1, s)
        I = Interval(-0.5, 0.5)
        for x in rng.uniform(-0.45, 0.45, 5):
            aff = max(aff, abs(apply_pointwise(I, affine([rng.normal()], rng.normal()), [x], P1).value))
            r = rng.uniform(0.3, 3.0)
            a = apply_pointwise(I, sine(1), [x], P1).value
            b = apply_pointwise(Interval(-0.5 * r, 0.5 * r), rescaled(sine(1), 1.0 / r), [r * x], P1).value
            sc = max(sc, abs(b - a / r**2))
    ok = max(aff, tr, sc) <= 1e-8
    record(4, "affine harmonic, translation and scaling identities", ok,
           f"affine {aff:.2e}, translation {tr:.2e}, scaling {sc:.2e}")
    assert ok


def _monotone(errors):
    return all(b < a for a, b in zip(errors, errors[1:]))


def test_05_solver_oracle(record):
    P1 = KernelParams(1, 0.5)
    e1 = [r.max_error for r in convergence_study(Interval(-0.5, 0.5), 1.0, 0.0, P1, [3, 4, 5, 6],
                                                 exact=torsion(0.5, 1))]
    P2 = KernelParams(2, 0.5)
    e2 = [r.max_error for r in convergence_study(Ball.unit(2), 1.0, 0.0, P2, [0, 1, 2, 3], exact=torsion(1.0, 2))]
    ok1 = _monotone(e1) and e1[-1] <= 1e-4
    ok2 = _monotone(e2) and e2[-1] <= 1e-3
    fmt = lambda e: ", ".join(f"{v:.2e}" for v in e)
    record(5, "solver torsion oracle, monotone over 4 levels", ok1 and ok2,
           f"interval {fmt(e1)} (<= 1e-4); ball {fmt(e2)} (<= 1e-3)")
    assert ok1 and ok2


def _random_nonnegative(rng, n):
    a0 = rng.uniform(-0.3, 1.0)
    a = rng.normal(size=n)
    k = rng.normal(scale=4.0, size=n)
    ph = rng.uniform(0, 2 * np.pi)
    amp = rng.uniform(0.0, 1.0)

    def ev(x):
        return np.maximum(0.0, a0 + x @ a + amp * np.sin(x @ k + ph))

    # keep it nonzero somewhere near the centre
    return ScalarField(lambda x: ev(x) + 0.05 * np.exp(-np.sum(x * x, axis=-1) / 0.01), n, name="random f")


def test_06_maximum_principle_and_two_sided_bound(record):
    rng = np.random.default_rng(6)
    cases = [(Interval(-0.5, 0.5), KernelParams(1, 0.5), (5, 6)), (Ball.unit(2), KernelParams(2, 0.5), (2, 3))]
    worst_min = np.inf
    worst_drift = 0.0
    for dom, P, levels in cases:
        ops = [assemble(dom, make_grid(dom, lv), P) for lv in levels]
        fs = [constant(1.0, dom.dim)] + [_random_nonnegative(rng, dom.dim) for _ in range(10)]
        for k, f in enumerate(fs):
            bounds = []
            for A in ops:
                u, _ = solve_dirichlet(A, f, 0.0)
                if k > 0:
                    worst_min = min(worst_min, float(u.interior.min()))
                bounds.append(np.array(distance_bounds(u)))
            drift = float(np.max(np.abs(bounds[1] / bounds[0] - 1.0)))
            worst_drift = max(worst_drift, drift)
    ok = worst_min >= -1e-8 and worst_drift <= 0.2
    record(6, "discrete maximum principle and stable c d <= u <= C d", ok,
           f"min node value {worst_min:.2e} >= -1e-8; max drift of (c, C) {worst_drift:.1%} <= 20%")
    assert ok


MC_PATHS = 100_000


def test_07_monte_carlo(record):
    lines = []
    ok = True
    for dom, exact in ((Interval(-0.5, 0.5), 0.125), (Ball.unit(2), 0.25)):
        for s in (0.3, 0.5, 0.7):
            P = KernelParams(dom.dim, s)
            st = estimate_solution(dom, constant(1.0, dom.dim), np.zeros(dom.dim), MC_PATHS,
                                   JumpConfig(epsilon=0.05, seed=7), P, workers=WORKERS)
            z = (st.estimate - exact) / st.std_error
            ok &= abs(z) <= 3.0 and not st.flagged
            lines.append(f"{dom.kind} s={s}: z={z:+.2f}")
    # bias study on the interval, s = 1/2
    P = KernelParams(1, 0.5)
    eps_list = (0.4, 0.2, 0.1, 0.05, 0.02)
    err, se = [], []
    for eps in eps_list:
        st = estimate_solution(Interval(-0.5, 0.5), constant(1.0, 1), [0.0], MC_PATHS,
                               JumpConfig(epsilon=eps, seed=11), P, workers=WORKERS)
        err.append(st.estimate - 0.125)
        se.append(st.std_error)
    err, se = np.abs(err), np.array(se)
    significant = err[0] > 3.0 * se[0]
    shrinks = err[-1] < err[0] and err[-1] < err[1]
    resolved = bool(np.all(err[2:] <= 3.0 * se[2:]))
    ok_bias = significant and shrinks and resolved
    study = ", ".join(f"eps={e}: {v:.1e}" for e, v in zip(eps_list, err))
    record(7, "Monte Carlo within 3 SE at 1e5 paths; bias shrinks as eps -> 0.02", ok and ok_bias,
           "; ".join(lines) + f"; |error| {study} (SE {se.mean():.1e})")
    assert ok and ok_bias


def test_08_barrier_certification(record):
    P = KernelParams(2, 0.5)
    build = build_boundary_barrier(1.0, P)
    cert = build.certification
    n_pts = len(cert.values)
    rng = np.random.default_rng(8)
    worst_low = worst_high = -np.inf
    for _ in range(1000):
        x = np.array([rng.uniform(-1.0, 1.0), rng.uniform(1e-3, 1.0)])
        d = x[1]
        w = rng.standard_normal(2)
        z = x + d * rng.random() ** 0.5 * w / np.linalg.norm(w)
        diff, bound = comparison_defect(1.0, x, z)
        worst_low = max(worst_low, -float(diff))
        worst_high = max(worst_high, float(diff - bound))
    tol = 1e-12
    ok_cmp = worst_low <= tol and worst_high <= tol
    ok = cert.passed and cert.min_value >= 0.9 and n_pts == 50 and ok_cmp
    record(8, "barrier certification and pointwise comparison", ok,
           f"p={build.barrier.p}, r0={build.barrier.r0}, min L phi {cert.min_value:.3f} >= 0.9 on {n_pts} points; "
           f"largest comparison excess {max(worst_low, worst_high):.1e} (<= 0) at 1000 pairs")
    assert ok


def test_09_planar_identity(record):
    rng = np.random.default_rng(9)
    worst = 0.0
    for k in range(10):
        P = KernelParams(2, (0.25, 0.5, 0.75)[k % 3])
        x = np.array([rng.uniform(-0.5, 0.5), rng.uniform(0.02, 0.5)])
        p = rng.uniform(1.0, 1.95)
        worst = max(worst, planar_identity(1.0, x, p, P).defect)
    ok = worst <= 1e-6
    record(9, "planar identity -L(d_T^p) = psi(p, d_U/d_T) d_T^(p-2)", ok, f"max defect {worst:.2e} at 10 (x, p)")
    assert ok


def test_10_regularity_suite(record):
    P = KernelParams(1, 0.5)
    I = Interval(-0.5, 0.5)
    grid = make_grid(I, 5)
    u, _ = solve_dirichlet(assemble(I, grid, P), 1.0, 0.0)
    depths = grid.points[grid.free] + 0.5
    depths = depths[depths <= 0.5]
    fit = fit_boundary_expansion(boundary_quotient_profile(u, I, [-0.5], [1.0], depths), window=default_window(grid))
    osc = oscillation_contraction(lambda x: x + x**1.5, levels=6)
    h = discrete_harmonic_profile(P, 4)
    x = h.grid.points
    lin = liouville_linearity_check(x[x > 0], h.values[x > 0])
    ok_c0 = abs(fit.c0 - 0.5) <= 0.01
    ok_osc = bool(np.all(np.abs(osc.ratios - 0.5) <= 0.02))
    ok_lin = lin.deviation <= 1e-8
    ok = ok_c0 and ok_osc and ok_lin
    record(10, "regularity: c0, oscillation ratios, Liouville linearity", ok,
           f"c0 {fit.c0:.4f} (0.5 +- 0.01); ratios {np.array2string(osc.ratios, precision=3)} (0.5 +- 0.02); "
           f"linearity deviation {lin.deviation:.1e} <= 1e-8")
    assert ok


def _run_cli(args, path):
    code = cli.main(args + ["--output", str(path)])
    with open(path, "rb") as fh:
        return code, fh.read()


def test_11_determinism(record, repo_root, tmp_path):
    same = {}
    for sub in ("selftest", "mc"):
        cfg = os.path.join(repo_root, "golden", f"{sub}.cfg")
        c1, o1 = _run_cli([sub, cfg, "--workers", "1"], tmp_path / f"{sub}1.csv")
        c2, o2 = _run_cli([sub, cfg, "--workers", "1"], tmp_path / f"{sub}2.csv")
        same[sub] = c1 == c2 == 0 and o1 == o2 and len(o1) > 0
    ok = all(same.values())
    record(11, "byte-identical selftest and mc output", ok, ", ".join(f"{k}: {v}" for k, v in same.items()))
    assert ok
