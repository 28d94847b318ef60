import math

import numpy as np
import pytest

from pantograph_cg.dyson_phillips import SeriesConfig, dp_solve, dp_trajectory
from pantograph_cg.grid import (
    L1, GridFunction, HorizonError, ModelParams, Trajectory, make_grid, make_initial,
    norm, total_mass,
)
from pantograph_cg.operators import shift_apply
from pantograph_cg.reference import FDConfig, fd_solve, pde_residual, recover_n

P = ModelParams(g=1.0, b=1.0, mu=0.0, alpha=2.0)


def test_config_validation():
    with pytest.raises(ValueError):
        FDConfig(cfl=1.1)
    with pytest.raises(ValueError):
        FDConfig(cfl=0.0)
    with pytest.raises(ValueError):
        FDConfig(time_scheme="rk4")


def test_final_time_hit_exactly():
    g = make_grid(10.0, 1e-2)
    u0 = make_initial("hat", [1.0, 1.0], g)
    tr = fd_solve(u0, P, 0.777, FDConfig(cfl=0.9))
    assert tr.times[-1] == pytest.approx(0.777, rel=1e-14)
    assert tr.meta["cfl"] <= 0.9


def test_zero_final_time_returns_data():
    g = make_grid(10.0, 1e-2)
    u0 = make_initial("hat", [1.0, 1.0], g)
    tr = fd_solve(u0, P, 0.0)
    assert tr.times.tolist() == [0.0]
    np.testing.assert_array_equal(tr.snapshots[0].values, u0.values)


def test_horizon_and_save_times_rejected():
    g = make_grid(10.0, 1e-2)
    u0 = make_initial("hat", [1.0, 1.0], g)
    with pytest.raises(HorizonError):
        fd_solve(u0, P, 9.0)
    with pytest.raises(ValueError):
        fd_solve(u0, P, 1.0, save_times=[1.5])


def test_transport_only_matches_shift():
    g = make_grid(10.0, 1e-3)
    p0 = ModelParams(g=1.0, b=0.0)
    u0 = make_initial("hat", [1.0, 1.0], g)
    fd = fd_solve(u0, p0, 1.0).snapshots[-1]
    exact = shift_apply(u0, 1.0, p0)
    assert norm(fd - exact, L1) <= 0.01 * norm(exact, L1)


def test_positivity_boundary_and_mass():
    g = make_grid(10.0, 2e-3)
    u0 = make_initial("indicator", [0.5, 1.5], g)
    tr = fd_solve(u0, P, 1.0, save_times=[0.25, 0.5, 1.0])
    for t, s in zip(tr.times, tr.snapshots):
        assert s.values.min() >= 0.0
        assert s.values[0] == 0.0
        assert total_mass(s) == pytest.approx(math.exp(2 * t) * total_mass(u0), rel=1e-2)


def test_euler_scheme_runs_positive():
    g = make_grid(10.0, 5e-3)
    u0 = make_initial("hat", [1.0, 1.0], g)
    tr = fd_solve(u0, P, 1.0, FDConfig(cfl=1.0, time_scheme="euler"))
    assert tr.snapshots[-1].values.min() >= 0.0
    assert tr.meta["time_scheme"] == "euler"


def test_save_times_sorted_and_snapped():
    g = make_grid(10.0, 1e-2)
    u0 = make_initial("hat", [1.0, 1.0], g)
    tr = fd_solve(u0, P, 1.0, save_times=[1.0, 0.0, 0.5])
    assert tr.times[0] == 0.0 and tr.times[-1] == pytest.approx(1.0)
    assert abs(tr.times[1] - 0.5) <= tr.meta["dt"] / 2
    assert tr.meta["requested_times"] == [0.0, 0.5, 1.0]


def test_agrees_with_series():
    g = make_grid(10.0, 2e-3)
    u0 = make_initial("hat", [1.0, 1.0], g)
    fd = fd_solve(u0, P, 1.0).snapshots[-1]
    dp = dp_solve(u0, P, SeriesConfig(1.0)).partial_sum
    assert norm(fd - dp, L1) <= 0.02 * norm(dp, L1)


def test_recover_n():
    g = make_grid(1.0, 0.25)
    u = GridFunction(g, np.ones(g.n_points))
    n = recover_n(u, math.log(2.0), ModelParams(g=1.0, b=1.0, mu=1.0))
    np.testing.assert_allclose(n.values, 0.25, rtol=1e-15)
    np.testing.assert_array_equal(recover_n(u, 0.0, P).values, u.values)
    with pytest.raises(ValueError):
        recover_n(u, -1.0, P)


def _gauss_transport_traj(h, dt, n=5):
    g = make_grid(10.0, h)
    p0 = ModelParams(g=1.0, b=0.0)
    times = np.arange(n) * dt + 1.0
    snaps = [GridFunction(g, np.exp(-((g.x - 3.0 - t) / 0.4) ** 2)) for t in times]
    return Trajectory(times, snaps, p0, "exact"), p0


def test_residual_of_exact_transport_is_second_order():
    # dt = h / 2 keeps the space and time truncation errors from cancelling
    r1 = pde_residual(*_gauss_transport_traj(1e-2, 5e-3))
    r2 = pde_residual(*_gauss_transport_traj(5e-3, 2.5e-3))
    assert r1 < 1e-2
    assert r1 / r2 == pytest.approx(4.0, rel=0.1)


def test_residual_zero_trajectory():
    g = make_grid(1.0, 0.1)
    snaps = [g.zeros() for _ in range(3)]
    assert pde_residual(Trajectory(np.array([0.0, 0.1, 0.2]), snaps, P, "zero"), P) == 0.0


def test_residual_shrinks_under_refinement():
    out = []
    for h in (2e-2, 1e-2, 5e-3):
        g = make_grid(10.0, h)
        v = np.exp(-(((g.x - 1.5) / 0.3) ** 2))
        v[0] = 0.0
        v[g.x > 4.0] = 0.0
        dt = h / 2
        tr = dp_trajectory(GridFunction(g, v), P, [0.5 - dt, 0.5, 0.5 + dt], SeriesConfig(1.0))
        out.append(pde_residual(tr, P))
    assert out[0] > out[1] > out[2]
    assert out[2] < 0.02


def test_residual_rejects_bad_input():
    g = make_grid(1.0, 0.1)
    with pytest.raises(ValueError):
        pde_residual(Trajectory(np.array([0.0, 0.1]), [g.zeros()] * 2, P, "x"), P)
    with pytest.raises(ValueError):
        pde_residual(Trajectory(np.array([0.0, 0.1, 0.3]), [g.zeros()] * 3, P, "x"), P)
