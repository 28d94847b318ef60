"""
How many series terms are needed?
=================================

The remainder after n terms is at most (|H| t)^(n+1) e^(|H| t) / (n+1)!.
Tabulate it and read off the smallest n for a few tolerances.
"""

from pantograph_cg import ModelParams, h_norm, truncation_bound
from pantograph_cg.cli import minimal_terms
from pantograph_cg.grid import L1, SUP

params = ModelParams(g=1.0, b=1.0, alpha=2.0)
for space in (L1, SUP):
    hn = h_norm(space, params)
    print(f"{space}: |H| = {hn}")
    for t in (0.5, 1.0, 2.0):
        ns = [minimal_terms(t, hn, tol) for tol in (1e-3, 1e-6, 1e-9)]
        print(f"  t={t}: n for tol 1e-3/1e-6/1e-9 = {ns}")

# the bound first grows, then decays factorially
print([f"{truncation_bound(n, 2.0, 2.0):.2g}" for n in range(0, 20, 2)])
