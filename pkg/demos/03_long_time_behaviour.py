"""
Long-time behaviour
===================

After removing the exponential mass growth the population settles to a
fixed profile. Estimate it with running time averages and with Abel
(Laplace) means, and see how the two compare as lambda gets small.
"""

from pantograph_cg import ModelParams, make_grid, make_initial, norm, total_mass, y_estimate

params = ModelParams(g=1.0, b=1.0)
grid = make_grid(10.0, 5e-3)
u0 = make_initial("hat", [1.0, 1.0], grid)

est = y_estimate(u0, params, (0.5, 0.25, 0.125, 0.0625), cesaro_t=20.0)

ces = est.cesaro
print(f"time average over [0, 20]: final-quarter stabilization {ces.final_stabilization():.2e}")
print(f"mass of the averaged profile {total_mass(ces.final):.5f}")

print("lambda   gap to time average   horizon change   tail bound")
for lam, gap, ch, tb in zip(est.lambdas, est.cesaro_gaps, est.horizon_changes, est.tail_bounds):
    print(f"{lam:7.4f}   {gap:19.4f}   {ch:14.3e}   {tb:10.3e}")

# the Abel mean is biased by O(lambda); the gaps above shrink accordingly
y = est.candidates[-1]
print(f"smallest-lambda profile peaks at x = {grid.x[y.values.argmax()]:.3f}, L1 {norm(y):.4f}")
