"""
Series solution of the cell growth equation
===========================================

Sum the Dyson-Phillips series for a hat-shaped initial population and
look at how quickly the terms die off.
"""

import math

import numpy as np

from pantograph_cg import ModelParams, SeriesConfig, dp_solve, make_grid, make_initial, norm, total_mass

# growth rate g, division rate b, two daughters per division
params = ModelParams(g=1.0, b=1.0, mu=0.0, alpha=2.0)
grid = make_grid(10.0, 1e-3)
u0 = make_initial("hat", [1.0, 1.0], grid)

res = dp_solve(u0, params, SeriesConfig(t_final=1.0, tol=1e-6))
print(f"terms used: {res.n_used}, certified remainder <= {res.remainder_bound:.2e}")

# each term is bounded by (|H| t)^n / n! |u0| with |H| = b alpha in L1
for n, tn in enumerate(res.term_norms):
    print(f"  n={n:2d}  |S_n u0| = {tn:.3e}   bound = {2.0**n / math.factorial(n):.3e}")

# total mass grows like exp(b alpha t)
print(f"mass at t=1: {total_mass(res.partial_sum):.6f}  (e^2 = {math.e**2:.6f})")

# the profile: where do the cells sit at t = 1?
u = res.partial_sum.values
peak = grid.x[np.argmax(u)]
print(f"peak at x = {peak:.3f}, support ends at x = {grid.x[np.flatnonzero(u)[-1]]:.3f}")
print(f"L1 norm {norm(res.partial_sum):.4f}")
