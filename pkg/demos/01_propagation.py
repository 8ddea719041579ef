import math

import numpy as np

from holodescent import StateVector, SufficientStats, propagate, vm_pfaffian_system
from holodescent.vonmises import bessel_i0_series, bessel_i1_series

# With zero sufficient statistics the objective is just 2 pi I0(|theta|),
# so the propagated first entry can be checked against the Bessel series.
stats = SufficientStats(0.0, 0.0)
system = vm_pfaffian_system(stats)


def exact(theta):
    k = np.linalg.norm(theta)
    return np.array([2 * math.pi * bessel_i0_series(k), 2 * math.pi * bessel_i1_series(k)])


start = np.array([1.0, 0.0])
state = StateVector(start, exact(start))

# walk around a square; F is carried along, never recomputed
corners = [(3.0, 0.0), (3.0, 3.0), (-2.0, 3.0), (-2.0, 0.5), (1.0, 0.0)]
for corner in corners:
    state = propagate(system, state, corner)
    ref = exact(state.point)
    print(f"at {state.point}:  F[0] = {state.F[0]:.12g}   series = {ref[0]:.12g}   "
          f"rel err = {abs(state.F[0] - ref[0]) / ref[0]:.1e}")

# Back at the start, the loop closes up to integration error
print("loop closure error:", abs(state.F[0] - exact(start)[0]))

# Paths through the origin are refused
try:
    propagate(system, StateVector((-1.0, 0.0), exact((-1.0, 0.0))), (1.0, 0.0))
except Exception as exc:
    print(type(exc).__name__, "-", exc)
