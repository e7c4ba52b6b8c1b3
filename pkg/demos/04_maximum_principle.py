"""
Maximum principle along a control
=================================

At each time the control value should maximize the linear functional
h -> Re J_N(F' (phi_t')^-1 h(phi_t)) over the control set.  The gap between
the maximum and the achieved value is zero along an extremal control.
"""

import numpy as np

from loewner_pmp import builtin_control, koebe_control, pmp_check

for name, control in [("koebe", koebe_control()), ("rotating", builtin_control("rotating:1"))]:
    for N in (2, 3):
        rep = pmp_check(control, N)
        worst = int(np.argmax(rep.gap))
        print(f"{name:9s} N={N}: max gap {rep.max_gap:.2e} at t={rep.times[worst]:.3f} "
              f"over {len(rep.times)} sample times")

# the table behind the koebe report
rep = pmp_check(koebe_control(), 2, sample_times=[0.0, 0.5, 1.0, 2.0, 5.0])
print(rep.to_csv())
