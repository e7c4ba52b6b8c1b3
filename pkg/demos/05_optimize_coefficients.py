"""
Maximizing a coefficient over controls
======================================

Multi-start Nelder-Mead over the angles of piecewise-constant slit
controls.  The optimum approaches the bound Re a_N <= N, attained by the
constant control kappa = -1.
"""

import time

import numpy as np

from loewner_pmp import OptimizeProblem, optimize

for N, K, T in [(2, 8, 10.0), (3, 16, 12.0)]:
    t0 = time.perf_counter()
    res = optimize(OptimizeProblem(N, horizon=T, pieces=K, restarts=8, seed=0))
    kap = [v.atoms[0].kappa for v in res.best_control.values]
    print(f"N={N}: best Re a_N = {res.best_value:.6f} ({time.perf_counter() - t0:.1f}s)")
    print("   restart values", np.round(res.restart_values, 6))
    print("   first piece kappa", np.round(kap[0], 4), " PMP gap at best", f"{res.pmp_gap_at_best:.1e}")

# a single piece reduces to a one-angle problem with a closed form
for T in (1.0, 2.0, 4.0):
    res = optimize(OptimizeProblem(2, horizon=T, pieces=1, restarts=2))
    print(f"K=1, T={T}: {res.best_value:.10f} vs 2(1-e^-T) = {2 * (1 - np.exp(-T)):.10f}")
