"""Convergence of the discrete torsion problem on the interval and the unit disc."""
from censored_lab.domain import Ball, Interval
from censored_lab.fields import torsion
from censored_lab.solver import convergence_study
from censored_lab.special_fn import KernelParams


def table(domain, levels, exact):
    P = KernelParams(domain.dim, 0.5)
    print(f"{domain!r}")
    print("level,h,unknowns,max_error,order")
    for r in convergence_study(domain, 1.0, 0.0, P, levels, exact=exact):
        print(f"{r.level},{r.h:.4g},{r.unknowns},{r.max_error:.3e},{r.order:.2f}")


if __name__ == "__main__":
    table(Interval(-0.5, 0.5), [3, 4, 5, 6], torsion(0.5, 1))
    table(Ball.unit(2), [0, 1, 2, 3], torsion(1.0, 2))
