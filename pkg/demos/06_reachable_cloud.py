"""
Reachable coefficients
======================

Random convex combinations of slit fields give a cloud of (a_2, a_3)
values.  Every sample respects |a_2| <= 2.
"""

import time

import numpy as np

from loewner_pmp import sample_reachable

t0 = time.perf_counter()
s = sample_reachable(1, [2, 3], 10_000, horizon=10.0, pieces=4, seed=0)
print(f"10^4 samples in {time.perf_counter() - t0:.1f}s")
print("max |a_2| =", np.max(np.abs(s.points[:, 0])))
print("max |a_3| =", np.max(np.abs(s.points[:, 1])))

# each point carries a hash of the control that produced it
print(s.to_csv().splitlines()[:3])

# a coarse histogram of |a_2|
hist, edges = np.histogram(np.abs(s.points[:, 0]), bins=8, range=(0, 2))
for h, lo, hi in zip(hist, edges, edges[1:]):
    print(f"{lo:.2f}-{hi:.2f} {'#' * int(60 * h / hist.max())}")
