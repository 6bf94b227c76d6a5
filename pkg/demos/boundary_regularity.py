"""u/d near the boundary: expansion fit, oscillation decay and the half-line Liouville check."""
import numpy as np

from censored_lab.analysis import (boundary_quotient_profile, default_window, discrete_harmonic_profile,
                                   fit_boundary_expansion, liouville_linearity_check, oscillation_contraction)
from censored_lab.domain import Interval
from censored_lab.solver import assemble, make_grid, solve_dirichlet
from censored_lab.special_fn import KernelParams

if __name__ == "__main__":
    P = KernelParams(1, 0.5)
    I = Interval(-0.5, 0.5)
    for level in (4, 5, 6):
        grid = make_grid(I, level)
        u, _ = solve_dirichlet(assemble(I, grid, P), 1.0, 0.0)
        depths = grid.points[grid.free] + 0.5
        prof = boundary_quotient_profile(u, I, [-0.5], [1.0], depths[depths <= 0.5])
        rep = fit_boundary_expansion(prof, window=default_window(grid))
        print(f"level {level}: c0 = {rep.c0:.5f}, alpha_hat = {rep.alpha_hat}, window = "
              f"({rep.window[0]:.2e}, {rep.window[1]:.2e})")
    osc = oscillation_contraction(lambda x: x + x**1.5)
    print("oscillation ratios for x + x^1.5:", np.array2string(osc.ratios, precision=4))
    h = discrete_harmonic_profile(P, 4)
    x = h.grid.points
    print("Liouville deviation for the discrete harmonic x:",
          f"{liouville_linearity_check(x[x > 0], h.values[x > 0]).deviation:.1e}")
