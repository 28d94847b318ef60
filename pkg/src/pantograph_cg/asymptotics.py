"""Long-time behaviour of the cell growth equation.

After dividing out the mass growth, ``v(t) = exp(-b alpha t) u(t)`` is a
bounded evolution in L1 (its mass is conserved). Its limit profile ``y`` is
estimated two ways:

* Cesaro means ``(1/t) int_0^t v(s) ds`` for increasing ``t``;
* Abel means ``lam int_0^inf exp(-lam s) v(s) ds`` for decreasing ``lam``,
  which is ``lam R(lam + b alpha, G) u0`` written as a Laplace transform of
  the solution. The integral is cut at a finite horizon ``T``; since
  ``|v(s)|_1 <= |u0|_1`` the neglected tail is at most ``exp(-lam T) |u0|_1``.

Neither estimate is compared against a closed-form ``y``; the module reports
how well they settle and how well they agree.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dyson_phillips import SeriesConfig, dp_solve
from .grid import L1, GridFunction, ModelParams, Trajectory, norm

__all__ = [
    "CesaroEstimate",
    "ResolventEstimate",
    "DEFAULT_LAMBDAS",
    "rescaled_trajectory",
    "rescaled_dp_trajectory",
    "cesaro_mean",
    "laplace_mean",
    "laplace_tail_bound",
    "resolvent_apply",
    "y_estimate",
]

DEFAULT_LAMBDAS = (0.5, 0.25, 0.125, 0.0625)
_MIN_LAMBDA_HORIZON = 5.0


def _n_threads() -> int:
    raw = os.environ.get("PANTOGRAPH_CG_THREADS", "0").strip() or "0"
    n = int(raw)
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(eq=False)
class CesaroEstimate:
    t_grid: np.ndarray
    running_means: list[GridFunction]
    stabilization_metric: np.ndarray  # first entry is nan

    @property
    def final(self) -> GridFunction:
        return self.running_means[-1]

    def final_stabilization(self, fraction: float = 0.25) -> float:
        """Largest stabilization metric over the last `fraction` of the time grid."""
        t_end = self.t_grid[-1]
        sel = (self.t_grid >= (1 - fraction) * t_end) & np.isfinite(self.stabilization_metric)
        return float(self.stabilization_metric[sel].max()) if sel.any() else math.nan


@dataclass(eq=False)
class ResolventEstimate:
    """Abel-mean candidates for the limit profile, one per ``lam``.

    ``consistency[k]`` is the relative L1 distance between candidates ``k``
    and ``k + 1``. ``horizon_changes[k]``, when computed, is the L1 change of
    candidate ``k`` when its horizon is doubled; it should stay below
    ``tail_bounds[k]``. ``cesaro_gaps`` compare each candidate with
    ``cesaro.final``.
    """

    lambdas: np.ndarray
    candidates: list[GridFunction]
    tail_bounds: np.ndarray
    horizon: float
    consistency: np.ndarray = field(default_factory=lambda: np.array([]))
    horizon_changes: np.ndarray | None = None
    cesaro: CesaroEstimate | None = None
    cesaro_gaps: np.ndarray | None = None


def rescaled_trajectory(traj: Trajectory, params: ModelParams) -> Trajectory:
    """Multiply each snapshot by ``exp(-b alpha t)``.

    Trajectories already marked ``meta["rescaled"]`` are returned unchanged.
    """
    if traj.meta.get("rescaled"):
        return traj
    rate = params.growth_exponent
    snaps = [s * math.exp(-rate * t) for t, s in zip(traj.times, traj.snapshots)]
    meta = dict(traj.meta, rescaled=True)
    return Trajectory(traj.times, snaps, traj.params, traj.solver_tag, meta=meta)


def rescaled_dp_trajectory(
    u0: GridFunction,
    params: ModelParams,
    t_end: float,
    chunk: SeriesConfig,
    *,
    save_stride: int = 1,
    outflow_tol: float = 1e-6,
) -> Trajectory:
    """Rescaled series solution on ``[0, t_end]`` by restarting every ``chunk.t_final``.

    Each restart solves over one chunk with the series and rescales; the
    quadrature nodes inside a chunk double as output times, thinned by
    `save_stride`. Because the solution's support eventually fills any
    finite domain, the horizon test for each chunk is the mass-based one
    (see `check_horizon`) with tolerance `outflow_tol`.

    ``meta`` records ``rescaled``, the per-chunk ``n_used`` and whether every
    chunk ``converged``.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    n_chunks = round(t_end / chunk.t_final)
    if n_chunks < 1 or abs(n_chunks * chunk.t_final - t_end) > 1e-9 * t_end:
        raise ValueError("t_end must be a whole number of chunks")
    if (chunk.n_time_nodes - 1) % save_stride:
        raise ValueError("save_stride must divide n_time_nodes - 1")
    rate = params.growth_exponent
    dt_chunk = chunk.t_final
    times = [0.0]
    snaps = [u0]
    n_used, converged = [], True
    v = u0
    for c in range(n_chunks):
        res = dp_solve(v, params, chunk, L1, outflow_tol=outflow_tol, keep_nodes=True)
        n_used.append(res.n_used)
        converged &= res.converged
        decay = np.exp(-rate * res.node_times)
        rows = res.node_sums * decay[:, None]
        rows[:, 0] = 0.0
        t0 = c * dt_chunk
        for j in range(save_stride, chunk.n_time_nodes, save_stride):
            times.append(t0 + res.node_times[j])
            snaps.append(GridFunction(u0.grid, rows[j]))
        v = GridFunction(u0.grid, rows[-1])
    # the chunk end times accumulate rounding; pin them to the uniform grid
    step = dt_chunk * save_stride / (chunk.n_time_nodes - 1)
    times = np.arange(len(times)) * step
    meta = {"rescaled": True, "n_used": n_used, "converged": converged}
    return Trajectory(times, snaps, params, "dp", meta=meta)


def _uniform_step(times: np.ndarray) -> float:
    d = np.diff(times)
    if d.size == 0 or not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
        raise ValueError("trajectory must be uniformly spaced in time")
    return float(d[0])


def cesaro_mean(traj: Trajectory, params: ModelParams) -> CesaroEstimate:
    """Running time averages of the rescaled trajectory (trapezoid rule).

    The mean at ``t = 0`` is the initial snapshot itself. Each running
    integral is the previous one plus a single trapezoid panel.
    """
    if len(traj) < 5:
        raise ValueError("need at least 5 snapshots")
    if traj.times[0] != 0.0:
        raise ValueError("trajectory must start at t = 0")
    dt = _uniform_step(traj.times)
    v = rescaled_trajectory(traj, params)
    grid = traj.grid
    vals = [s.values for s in v.snapshots]
    integral = np.zeros(grid.n_points)
    means = [GridFunction(grid, vals[0])]
    for k in range(1, len(vals)):
        integral = integral + 0.5 * dt * (vals[k - 1] + vals[k])
        means.append(GridFunction(grid, integral / traj.times[k]))
    metric = np.full(len(means), np.nan)
    for k in range(1, len(means)):
        denom = norm(means[k], L1)
        diff = norm(means[k] - means[k - 1], L1)
        metric[k] = diff / denom if denom > 0 else 0.0
    return CesaroEstimate(np.array(traj.times), means, metric)


def _index_of(times: np.ndarray, t: float) -> int:
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, t):
        raise ValueError(f"t = {t} is not a snapshot time")
    return k


def laplace_mean(
    traj: Trajectory, params: ModelParams, lam: float, t_from: float, t_to: float
) -> GridFunction:
    """``lam int_{t_from}^{t_to} exp(-lam s) v(s) ds`` by the trapezoid rule.

    ``v`` is the rescaled trajectory; both limits must be snapshot times.
    Splitting ``[0, 2T]`` at ``T`` reproduces the single-range rule exactly.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    dt = _uniform_step(traj.times)
    v = rescaled_trajectory(traj, params)
    i0, i1 = _index_of(v.times, t_from), _index_of(v.times, t_to)
    acc = np.zeros(traj.grid.n_points)
    for k in range(i0, i1 + 1):
        w = 0.5 if k in (i0, i1) else 1.0
        acc += (w * dt * lam * math.exp(-lam * v.times[k])) * v.snapshots[k].values
    return GridFunction(traj.grid, acc)


def _default_chunk(cfg: SeriesConfig | None) -> SeriesConfig:
    return cfg if cfg is not None else SeriesConfig(t_final=0.5, n_time_nodes=21, tol=1e-9)


def laplace_tail_bound(
    lam: float, horizon: float, dt: float, mass_bound: float
) -> float:
    """Bound on the trapezoid Laplace sum beyond `horizon`.

    With ``|v(s)|_1 <= mass_bound`` the sum of ``lam dt exp(-lam s_k)`` over
    ``s_k >= horizon`` (half weight at the horizon) is
    ``exp(-lam horizon) (lam dt / 2) coth(lam dt / 2)``, which tends to the
    continuous tail ``exp(-lam horizon)`` as ``dt -> 0``.
    """
    x = 0.5 * lam * dt
    kappa = x / math.tanh(x) if x > 0 else 1.0
    # allowance for rounding in the summed estimator
    return math.exp(-lam * horizon) * mass_bound * kappa * (1 + 64 * np.finfo(float).eps)


def resolvent_apply(
    lam: float,
    u0: GridFunction,
    params: ModelParams,
    horizon: float,
    cfg: SeriesConfig | None = None,
    *,
    trajectory: Trajectory | None = None,
) -> GridFunction:
    """``lam R(lam + b alpha, G) u0`` truncated at `horizon`.

    ``cfg`` is the per-restart series configuration (``cfg.t_final`` is the
    restart interval). A precomputed trajectory reaching `horizon` may be
    passed instead to share it between several ``lam``.

    Raises ``ValueError`` unless ``lam > 0`` and ``lam * horizon >= 5``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if lam * horizon < _MIN_LAMBDA_HORIZON * (1 - 1e-12):
        raise ValueError(
            f"horizon {horizon} too short for lambda {lam}: need lambda*horizon >= 5"
        )
    if trajectory is None:
        trajectory = rescaled_dp_trajectory(u0, params, horizon, _default_chunk(cfg))
    return laplace_mean(trajectory, params, lam, 0.0, horizon)


def y_estimate(
    u0: GridFunction,
    params: ModelParams,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    horizon: float | None = None,
    cfg: SeriesConfig | None = None,
    *,
    cesaro_t: float | None = None,
    check_doubling: bool = True,
    save_stride: int = 1,
    outflow_tol: float = 1e-6,
    trajectory: Trajectory | None = None,
) -> ResolventEstimate:
    """Abel-mean candidates for the limit profile, with diagnostics.

    Parameters
    ----------
    lambdas : sequence of float
        Strictly decreasing, positive.
    horizon : float, optional
        Laplace truncation time, shared by all ``lam``; defaults to
        ``5 / min(lambdas)``.
    cfg : SeriesConfig, optional
        Per-restart series settings for the underlying trajectory.
    cesaro_t : float, optional
        Also form the Cesaro mean over ``[0, cesaro_t]`` and compare.
    check_doubling : bool
        Extend the trajectory to ``2 * horizon`` and record how much each
        candidate moves.
    trajectory : Trajectory, optional
        Precomputed (rescaled or not) trajectory covering every time needed.
    """
    lams = np.asarray(lambdas, dtype=float)
    if lams.size == 0 or np.any(lams <= 0) or np.any(np.diff(lams) >= 0):
        raise ValueError("lambdas must be positive and strictly decreasing")
    if horizon is None:
        horizon = _MIN_LAMBDA_HORIZON / lams.min()
    t_needed = max(2 * horizon if check_doubling else horizon, cesaro_t or 0.0)
    if trajectory is None:
        chunk = _default_chunk(cfg)
        n_chunks = math.ceil(t_needed / chunk.t_final - 1e-9)
        trajectory = rescaled_dp_trajectory(
            u0, params, n_chunks * chunk.t_final, chunk,
            save_stride=save_stride, outflow_tol=outflow_tol,
        )
    traj = rescaled_trajectory(trajectory, params)

    def one(lam):
        cand = resolvent_apply(lam, u0, params, horizon, trajectory=traj)
        change = None
        if check_doubling:
            change = norm(laplace_mean(traj, params, lam, horizon, 2 * horizon), L1)
        return cand, change

    with ThreadPoolExecutor(max_workers=min(_n_threads(), len(lams))) as pool:
        out = list(pool.map(one, lams))
    candidates = [c for c, _ in out]
    # the continuous argument uses |v(s)|_1 <= |u0|_1; the computed trajectory
    # only satisfies that up to its mass drift, so take the observed maximum
    dt = _uniform_step(traj.times)
    k_h = _index_of(traj.times, horizon)
    mass_bound = max(
        norm(u0, L1), max(norm(s, L1) for s in traj.snapshots[k_h:])
    )
    tails = np.array([laplace_tail_bound(lam, horizon, dt, mass_bound) for lam in lams])
    consistency = np.array([
        norm(a - b, L1) / max(norm(b, L1), np.finfo(float).tiny)
        for a, b in zip(candidates, candidates[1:])
    ])
    est = ResolventEstimate(
        lambdas=lams,
        candidates=candidates,
        tail_bounds=tails,
        horizon=float(horizon),
        consistency=consistency,
        horizon_changes=np.array([c for _, c in out]) if check_doubling else None,
    )
    if cesaro_t is not None:
        k = _index_of(traj.times, cesaro_t)
        prefix = Trajectory(
            traj.times[: k + 1], traj.snapshots[: k + 1], params, traj.solver_tag,
            meta=traj.meta,
        )
        est.cesaro = cesaro_mean(prefix, params)
        ref = est.cesaro.final
        ref_norm = norm(ref, L1)
        est.cesaro_gaps = np.array(
            [norm(c - ref, L1) / ref_norm if ref_norm > 0 else 0.0 for c in candidates]
        )
    return est
