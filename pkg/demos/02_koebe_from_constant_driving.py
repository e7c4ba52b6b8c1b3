"""
Koebe coefficients from a constant control
==========================================

Driving the Loewner equation with the constant boundary point kappa = -1
produces the Koebe function z/(1-z)^2, whose coefficients are a_N = N.
"""

import time

import numpy as np

from loewner_pmp import cross_check, integrate, koebe_control, limit_map
from loewner_pmp.controls import constant_control

control = koebe_control(20.0)

t0 = time.perf_counter()
traj = integrate(control, order=12, step=1 / 64)
f = limit_map(control, trajectory=traj)
print(f"integrated {len(traj.times) - 1} RK4 steps in {time.perf_counter() - t0:.2f}s")

for N in range(2, 9):
    print(f"a_{N} = {f.a(N).real: .8f}   (exact {N})")

# the linear coefficient of phi_t follows e^-t
drift = np.max(np.abs(traj.coeffs[:, 1] - np.exp(-traj.times)))
print("max |phi_t'(0) - e^-t| =", drift)

# a finite horizon gives a_2 = 2 (1 - e^-T)
for T in (0.5, 1.0, 3.0):
    a2 = limit_map(constant_control(np.pi, T), 3).a(2).real
    print(f"T={T}: a_2 = {a2:.10f}, 2(1-e^-T) = {2 * (1 - np.exp(-T)):.10f}")

# the jet route and the pointwise route agree
print("jet vs pointwise at z0=0.2:", cross_check(control, 0.2))
