"""
Controls on the ball in C^2
===========================

Polynomial vector fields -z + (quadratic terms), rescaled until
Re <h(z), z> <= 0 holds on a fixed validation grid.  Their Loewner flows
give normalized maps of the ball.
"""

import numpy as np

from loewner_pmp import limit_map, pmp_check, random_poly_control, validate_un

rng = np.random.default_rng(1)
control = random_poly_control(rng, pieces=2, horizon=2.0)
for v in control.values:
    rep = validate_un(v.poly_terms)
    print(f"piece valid={rep.valid}, max Re<h,z> on grid = {rep.max_violation:.3f}")

f = limit_map(control, order=4).jet
print("Df(0) =", np.round([[f.coeff((1, 0), r), f.coeff((0, 1), r)] for r in range(2)], 10))
print("coefficient of z1^2 in f_1:", f.coeff((2, 0), 0))

# the maximum over the validated family is only a lower bound for the true one
rep = pmp_check(control, (2, 0), sample_times=[0.25, 0.75, 1.25, 1.75])
print("gaps", np.round(rep.gap, 4), "lower bound:", rep.lower_bound)
