"""
Series solution against an upwind scheme
========================================

Two unrelated discretizations of the same problem should agree, and the
disagreement should shrink as the grid is refined (upwinding is first
order, so roughly halving with h).
"""

from pantograph_cg import (
    FDConfig, ModelParams, SeriesConfig, dp_solve, fd_solve, make_grid, make_initial, norm,
)

params = ModelParams(g=1.0, b=1.0)

for h in (4e-3, 2e-3, 1e-3):
    grid = make_grid(10.0, h)
    u0 = make_initial("hat", [1.0, 1.0], grid)
    dp = dp_solve(u0, params, SeriesConfig(1.0)).partial_sum
    fd = fd_solve(u0, params, 1.0, FDConfig(cfl=0.9)).snapshots[-1]
    print(f"h={h:.0e}  relative L1 gap {norm(fd - dp) / norm(dp):.5f}")

# with no division the equation is pure transport and the series is a shift
p0 = ModelParams(g=1.0, b=0.0)
grid = make_grid(10.0, 1e-3)
u0 = make_initial("hat", [1.0, 1.0], grid)
res = dp_solve(u0, p0, SeriesConfig(1.0))
fd = fd_solve(u0, p0, 1.0).snapshots[-1]
print(f"b=0: n_used={res.n_used}, upwind diffusion gap {norm(fd - res.partial_sum):.4f}")
