import math

import numpy as np
import pytest

from pantograph_cg.asymptotics import (
    _n_threads, cesaro_mean, laplace_mean, laplace_tail_bound, rescaled_dp_trajectory,
    rescaled_trajectory, resolvent_apply, y_estimate,
)
from pantograph_cg.dyson_phillips import SeriesConfig
from pantograph_cg.grid import (
    L1, GridFunction, ModelParams, Trajectory, make_grid, make_initial, norm, total_mass,
)

P = ModelParams(g=1.0, b=1.0, mu=0.0, alpha=2.0)
TRANSPORT = ModelParams(g=1.0, b=0.0)
CHUNK = SeriesConfig(0.5, n_time_nodes=21, tol=1e-9)


def _const_traj(params, n=41, dt=0.1):
    g = make_grid(1.0, 0.1)
    f = GridFunction(g, np.linspace(0.0, 1.0, g.n_points))
    times = np.arange(n) * dt
    return Trajectory(times, [f] * n, params, "const"), f


@pytest.fixture(scope="module")
def cstar_long():
    g = make_grid(10.0, 1e-2)
    u0 = make_initial("hat", [1.0, 1.0], g)
    return u0, rescaled_dp_trajectory(u0, P, 20.0, CHUNK)


# -- Cesaro means -----------------------------------------------------------


def test_cesaro_of_constant_is_constant():
    tr, f = _const_traj(TRANSPORT)
    est = cesaro_mean(tr, TRANSPORT)
    assert math.isnan(est.stabilization_metric[0])
    for m in est.running_means:
        np.testing.assert_allclose(m.values, f.values, rtol=1e-13, atol=1e-15)
    assert np.nanmax(est.stabilization_metric) < 1e-13
    assert est.final_stabilization() < 1e-13


def test_cesaro_of_oscillation_settles_like_one_over_t():
    g = make_grid(1.0, 0.1)
    f = GridFunction(g, np.ones(g.n_points))
    times = np.arange(2001) * 0.05
    snaps = [f * (1.0 + math.cos(t)) for t in times]
    est = cesaro_mean(Trajectory(times, snaps, TRANSPORT, "cos"), TRANSPORT)
    for k in (200, 1000, 2000):
        t = times[k]
        # exact running mean is 1 + sin(t)/t; trapezoid error is O(dt^2)
        assert abs(est.running_means[k].values[3] - (1 + math.sin(t) / t)) < 1e-3
        assert norm(est.running_means[k] - f, L1) <= 1.0 / t + 1e-3


def test_cesaro_rejects_bad_trajectories():
    tr, f = _const_traj(TRANSPORT, n=4)
    with pytest.raises(ValueError):
        cesaro_mean(tr, TRANSPORT)
    g = f.grid
    with pytest.raises(ValueError):
        cesaro_mean(Trajectory(np.arange(1.0, 7.0), [f] * 6, TRANSPORT, "x"), TRANSPORT)
    with pytest.raises(ValueError):
        cesaro_mean(Trajectory(np.array([0, 1, 2, 3, 5.0]), [f] * 5, TRANSPORT, "x"), TRANSPORT)


def test_rescaled_trajectory_idempotent_and_correct():
    tr, f = _const_traj(P, n=5)
    r1 = rescaled_trajectory(tr, P)
    assert rescaled_trajectory(r1, P) is r1
    np.testing.assert_allclose(r1.snapshots[2].values, f.values * math.exp(-2 * 0.2))


# -- rescaled series trajectory ---------------------------------------------


def test_rescaled_mass_conserved(cstar_long):
    u0, tr = cstar_long
    assert tr.meta["rescaled"] and tr.meta["converged"]
    masses = np.array([total_mass(s) for s in tr.snapshots])
    assert np.abs(masses / total_mass(u0) - 1).max() < 1e-3
    assert np.diff(tr.times) == pytest.approx(0.025)


def test_rescaled_trajectory_argument_checks():
    g = make_grid(10.0, 1e-2)
    u0 = make_initial("hat", [1.0, 1.0], g)
    with pytest.raises(ValueError):
        rescaled_dp_trajectory(u0, P, 0.75, CHUNK)
    with pytest.raises(ValueError):
        rescaled_dp_trajectory(u0, P, 1.0, CHUNK, save_stride=3)


# -- Laplace / resolvent ----------------------------------------------------


def test_laplace_telescopes(cstar_long):
    _, tr = cstar_long
    whole = laplace_mean(tr, P, 0.5, 0.0, 20.0)
    parts = laplace_mean(tr, P, 0.5, 0.0, 10.0) + laplace_mean(tr, P, 0.5, 10.0, 20.0)
    np.testing.assert_allclose(parts.values, whole.values, rtol=1e-13, atol=1e-16)


def test_tail_bound_values():
    assert laplace_tail_bound(0.25, 20.0, 0.0, 1.0) == pytest.approx(math.exp(-5), rel=1e-13)
    assert laplace_tail_bound(0.25, 20.0, 0.025, 1.0) == pytest.approx(math.exp(-5), rel=1e-4)
    # the bound dominates the discrete tail it is meant for
    lam, H, dt = 1.0, 5.0, 0.25
    s = H + dt * np.arange(4000)
    w = np.full(s.size, lam * dt)
    w[0] *= 0.5
    assert float(np.sum(w * np.exp(-lam * s))) <= laplace_tail_bound(lam, H, dt, 1.0)


def _hat_transport_resolvent(x, lam, horizon):
    # lam int_0^H exp(-lam s) hat(x - s) ds on a fine s mesh; hat(1, 1) has unit mass
    s = np.linspace(0.0, horizon, 50001)
    w = np.full(s.size, s[1] - s[0])
    w[[0, -1]] *= 0.5
    out = np.empty(x.size)
    for i in range(0, x.size, 200):
        xs = x[i : i + 200, None] - s[None, :]
        hat = 2.0 * np.clip(1.0 - np.abs(xs - 1.0) / 0.5, 0.0, None)
        out[i : i + 200] = (hat * (lam * np.exp(-lam * s) * w)).sum(axis=1)
    return out


def test_resolvent_transport_oracle():
    g = make_grid(12.0, 5e-3)
    u0 = make_initial("hat", [1.0, 1.0], g)
    tr = rescaled_dp_trajectory(u0, TRANSPORT, 10.0, CHUNK)
    masses = []
    for lam in (4.0, 2.0, 1.0):
        cand = resolvent_apply(lam, u0, TRANSPORT, 5.0, trajectory=tr)
        exact = _hat_transport_resolvent(g.x, lam, 5.0)
        assert np.abs(cand.values - exact).max() <= 2e-3 * exact.max()
        masses.append(total_mass(cand))
    # transport conserves mass, so each candidate's mass is the sum of its trapezoid weights
    s = tr.times[tr.times <= 5.0 + 1e-9]
    for lam, m in zip((4.0, 2.0, 1.0), masses):
        w = lam * np.exp(-lam * s) * 0.025
        assert m == pytest.approx(w.sum() - 0.5 * (w[0] + w[-1]), rel=1e-9)
        assert m == pytest.approx(1 - math.exp(-5.0 * lam), rel=1e-3)
    # large lam concentrates the Laplace weight near s = 0
    far = [norm(resolvent_apply(lam, u0, TRANSPORT, 5.0, trajectory=tr) - u0, L1)
           for lam in (4.0, 2.0, 1.0)]
    assert far[0] < far[1] < far[2]


def test_resolvent_linear_and_zero(cstar_long):
    u0, tr = cstar_long
    a = resolvent_apply(1.0, u0, P, 5.0)
    b = resolvent_apply(1.0, 2.0 * u0, P, 5.0)
    np.testing.assert_allclose(b.values, 2.0 * a.values, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(a.values, resolvent_apply(1.0, u0, P, 5.0, trajectory=tr).values,
                               rtol=1e-12, atol=1e-15)
    z = resolvent_apply(1.0, u0.grid.zeros(), P, 5.0)
    assert not z.values.any()


def test_resolvent_argument_checks():
    g = make_grid(10.0, 1e-2)
    u0 = make_initial("hat", [1.0, 1.0], g)
    with pytest.raises(ValueError):
        resolvent_apply(0.0, u0, P, 10.0)
    with pytest.raises(ValueError):
        resolvent_apply(0.25, u0, P, 10.0)
    with pytest.raises(ValueError):
        y_estimate(u0, P, lambdas=(0.25, 0.5))
    with pytest.raises(ValueError):
        y_estimate(u0, P, lambdas=())


# -- y_estimate --------------------------------------------------------------


def test_y_estimate_diagnostics(cstar_long):
    u0, tr = cstar_long
    est = y_estimate(u0, P, lambdas=(2.0, 1.0, 0.5), horizon=10.0, cesaro_t=10.0,
                     trajectory=tr)
    assert len(est.candidates) == 3 and est.consistency.shape == (2,)
    assert np.all(est.horizon_changes <= est.tail_bounds)
    assert est.cesaro_gaps.shape == (3,)
    # smaller lam moves the Abel mean towards the Cesaro mean
    assert est.cesaro_gaps[0] > est.cesaro_gaps[1] > est.cesaro_gaps[2]
    for c in est.candidates:
        assert c.values.min() >= 0.0
        assert total_mass(c) <= total_mass(u0) * 1.001


def test_y_estimate_thread_count_does_not_matter(cstar_long, monkeypatch):
    u0, tr = cstar_long
    kw = dict(lambdas=(2.0, 1.0), horizon=5.0, trajectory=tr)
    monkeypatch.setenv("PANTOGRAPH_CG_THREADS", "1")
    assert _n_threads() == 1
    a = y_estimate(u0, P, **kw)
    monkeypatch.setenv("PANTOGRAPH_CG_THREADS", "4")
    b = y_estimate(u0, P, **kw)
    for x, y in zip(a.candidates, b.candidates):
        np.testing.assert_array_equal(x.values, y.values)
