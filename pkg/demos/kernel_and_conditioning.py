"""Condition a smooth Gaussian process on mixed value and slope data.

The kernel carries analytic derivative blocks, so an observation of the
derivative is just another row in the Gram matrix.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from odex import (DerivOrder, KernelConfig, Observation, ObservationSet,
                  condition, kernel_eval, sample)

cfg = KernelConfig(lengthscale=1.0, amplitude=1.0)

# covariance between a value at t and a slope at t', closed form
print("k(0.0, 1.0)        =", kernel_eval(cfg, 0.0, 1.0,
                                          DerivOrder.VALUE, DerivOrder.VALUE))
print("d/dt' k(0.0, 1.0)  =", kernel_eval(cfg, 0.0, 1.0,
                                          DerivOrder.VALUE, DerivOrder.FIRST))
print("d2/dtdt' k(0, 1)   =", kernel_eval(cfg, 0.0, 1.0,
                                          DerivOrder.FIRST, DerivOrder.FIRST))

# two function values plus one exact slope in the middle
obs = ObservationSet([
    Observation(0.0, DerivOrder.VALUE, 0.0, 1e-6),
    Observation(2.0, DerivOrder.VALUE, 0.5, 1e-6),
    Observation(1.0, DerivOrder.FIRST, -1.0, 0.0),
])

ts = np.linspace(-0.5, 2.5, 200)
belief = condition(cfg, obs, [(t, DerivOrder.VALUE) for t in ts])
mean = belief.mean
std = belief.std

draws = np.array([sample(belief, seed=k) for k in range(6)])

plt.figure(figsize=(7, 4))
plt.fill_between(ts, mean - 2 * std, mean + 2 * std, alpha=0.25,
                 label="2 std band")
plt.plot(ts, mean, lw=2, label="posterior mean")
plt.plot(ts, draws.T, lw=0.6, alpha=0.7)
plt.plot([0.0, 2.0], [0.0, 0.5], "ko", label="value data")
plt.axvline(1.0, ls=":", c="k", lw=0.8)
plt.legend()
plt.title("GP conditioned on two values and one slope")
plt.tight_layout()
plt.savefig("kernel_and_conditioning.png", dpi=120)
print("wrote kernel_and_conditioning.png")

# the slope constraint pins the derivative exactly at t = 1
dbel = condition(cfg, obs, [(1.0, DerivOrder.FIRST)])
print("posterior slope at t=1:", dbel.mean[0], "+/-", dbel.std[0])
