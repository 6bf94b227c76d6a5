"""Small-jump cutoff eps against bias and cost for u(0) of the interval torsion problem."""
import numpy as np

from censored_lab.domain import Interval
from censored_lab.fields import constant
from censored_lab.special_fn import KernelParams
from censored_lab.stochastic import JumpConfig, estimate_solution

if __name__ == "__main__":
    I = Interval(-0.5, 0.5)
    P = KernelParams(1, 0.5)
    print("epsilon,estimate,error,std_error,mean_steps")
    for eps in (0.4, 0.2, 0.1, 0.05, 0.02):
        st = estimate_solution(I, constant(1.0, 1), [0.0], 50_000, JumpConfig(epsilon=eps, seed=1), P)
        print(f"{eps},{st.estimate:.5f},{st.estimate - 0.125:+.2e},{st.std_error:.1e},{st.mean_steps:.0f}")
