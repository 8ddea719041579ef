import math

import numpy as np

from holodescent import (
    hgd_minimize,
    mle_direct_newton,
    sufficient_stats,
    vm_initial_state,
    vm_pfaffian_system,
    vm_sample,
    VmParams,
)

# 100 draws at kappa = 5, mu = pi/4, i.e. theta = (3.54, 3.54)
data = vm_sample(5.0, math.pi / 4, 100, seed=2013)
stats = sufficient_stats(data)
print("c_bar = %.6f, s_bar = %.6f" % (stats.c_bar, stats.s_bar))

system = vm_pfaffian_system(stats)

# The objective is evaluated once, here. Everything after this is propagation.
x0 = np.array([-2.0, 0.1])
start = vm_initial_state(x0, stats)
result = hgd_minimize(system, start.point, start.F)

print("\n k      theta1      theta2            L     |grad|")
for rec in result.trace:
    print(f"{rec.k:2d} {rec.x[0]:11.6f} {rec.x[1]:11.6f} {rec.f:12.6f} {rec.grad_norm:10.2e}")

est = VmParams.natural(*result.x)
print(f"\n{result.status.value}: theta = ({est.theta1:.6f}, {est.theta2:.6f}), "
      f"kappa = {est.kappa:.4f}, mu = {est.mu:.4f}")

# Compare with plain Newton-Raphson that re-integrates at every step
newton = mle_direct_newton(stats, x0)
print("direct Newton:", newton.x, " max difference", np.max(np.abs(newton.x - result.x)))
