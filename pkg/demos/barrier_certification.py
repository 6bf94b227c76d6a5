"""Exterior-ball barrier for the half plane across s: chosen p, r0 and certified minimum."""
from censored_lab.barriers import build_boundary_barrier
from censored_lab.special_fn import KernelParams

if __name__ == "__main__":
    print("s,p,r0,min_L_phi,min_on_shell,ray_constant")
    for s in (0.25, 0.5, 0.75):
        b = build_boundary_barrier(1.0, KernelParams(2, s))
        pr = b.properties
        print(f"{s},{b.barrier.p},{b.barrier.r0},{b.certification.min_value:.3f},"
              f"{pr.min_on_shell:.3f},{pr.ray_constant:.2f}")
