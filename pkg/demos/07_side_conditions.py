"""
Side conditions
===============

Fix a_2 at the Koebe value and ask whether any perturbed control can
raise Re a_3 above 3.  Perturbations are pushed back onto the constraint
by penalized maximization; none should exceed the bound.
"""

import time

import numpy as np

from loewner_pmp import koebe_control, teichmueller_experiment

t0 = time.perf_counter()
rep = teichmueller_experiment(3, koebe_control(), perturbations=40, seed=0)
print(f"{rep.status}: {rep.feasible_count} feasible of {len(rep.feasible)} samples "
      f"in {time.perf_counter() - t0:.1f}s")
print("side value A_2 =", rep.side_values[2], " bound Re A_3 =", rep.bound)
print("largest Re a_3 - Re A_3 among feasible samples:", rep.max_excess)
print("violations:", rep.violations)

far = np.abs(rep.samples[:, 0] - rep.side_values[2]) > 1e-4
print("samples off the slice (ignored):", int(np.sum(far)))
