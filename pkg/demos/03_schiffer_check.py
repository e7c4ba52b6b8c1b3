"""
Schiffer equation and boundary positivity
=========================================

The extremal map for Re a_N satisfies a differential equation whose
right-hand side R_N must be nonnegative on the unit circle with a zero.
Koebe passes; the identity map and the map of a rotating control do not.
"""

import numpy as np

from loewner_pmp import Jet, builtin_control, koebe_jet, limit_map, schiffer_residual

for N in (2, 3, 4):
    r = schiffer_residual(koebe_jet(12), N)
    print(f"koebe N={N}: residual {r.residual_norm:.1e}, min R_N {r.boundary_min:.1e} "
          f"at theta {r.boundary_argmin:.4f}, satisfied {r.satisfied}")

r = schiffer_residual(Jet.identity(12), 2)
print("identity N=2: residual coefficients", np.round(r.residual_coeffs.real, 12),
      "min R_2", r.boundary_min)

F = limit_map(builtin_control("rotating:1"), 12).jet
r = schiffer_residual(F, 2)
print(f"rotating control: residual {r.residual_norm:.3f}, min R_2 {r.boundary_min:.3f}")

# rotated Koebe functions z/(1 - w z)^2 move the zero of R_N
w = -1.0
r = schiffer_residual(koebe_jet(12, w), 3)
print(f"koebe rotated by w=-1, N=3: zero of R_3 at theta {r.boundary_argmin:.4f}")
