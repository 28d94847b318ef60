"""The shift group, the pantograph operator and the generator on a grid.

With ``u`` extended by zero to the whole line, the transformed equation is
``u_t = -g u_x + b alpha^2 u(alpha x)``. Its pieces are

* ``S0(tau) f (x) = f(x - g tau)``, a group of isometries,
* ``H f (x) = b alpha^2 f(alpha x)``, a bounded operator, and
* ``G = -g d/dx + H``, the generator of the full solution group.

The ``*_rows`` variants act on a 2-D stack of samples (one function per
row) with a single precomputed stencil; the Dyson-Phillips recursion is
built on them.
"""

from __future__ import annotations

import numpy as np

from .grid import GridFunction, ModelParams, SpaceTag

__all__ = [
    "shift_apply",
    "shift_rows",
    "pantograph_apply",
    "pantograph_rows",
    "h_norm",
    "generator_apply",
]

_SNAP = 1e-9


def _split(y):
    """Integer part and fraction of ``y``, snapping near-integers."""
    y = np.asarray(y, dtype=float)
    near = np.rint(y)
    y = np.where(np.abs(y - near) < _SNAP, near, y)
    j = np.floor(y)
    return j.astype(np.intp), y - j


def shift_rows(rows: np.ndarray, distance: float, h: float) -> np.ndarray:
    """Translate every row right by ``distance`` (size units).

    Row ``k`` of the result samples ``x -> f_k(x - distance)`` with linear
    interpolation, zero for arguments left of the origin, and the first
    column forced to zero.
    """
    if distance < 0:
        raise ValueError(f"shift distance must be non-negative, got {distance}")
    rows = np.atleast_2d(rows)
    n = rows.shape[1]
    q, r = _split(distance / h)
    q, r = int(q), float(r)
    out = np.zeros_like(rows)
    if q >= n:
        return out
    if r == 0.0:
        out[:, q:] = rows[:, : n - q]
    else:
        # node i sits between source nodes i-q-1 and i-q; i <= q lands left of 0
        lo = rows[:, : n - q - 1]
        hi = rows[:, 1 : n - q]
        out[:, q + 1 :] = (1.0 - r) * hi + r * lo
    out[:, 0] = 0.0
    return out


def shift_apply(f: GridFunction, tau: float, params: ModelParams) -> GridFunction:
    """Apply the shift group: ``x -> f(x - g tau)`` for ``tau >= 0``."""
    if tau < 0:
        raise ValueError(f"only forward shifts are supported, got tau={tau}")
    out = shift_rows(f.values[None, :], params.g * tau, f.grid.h)[0]
    return GridFunction(f.grid, out)


def pantograph_rows(rows: np.ndarray, params: ModelParams) -> np.ndarray:
    """``b alpha^2 f(alpha x)`` for every row, zero where ``alpha x > L``."""
    rows = np.atleast_2d(rows)
    n = rows.shape[1]
    j, r = _split(params.alpha * np.arange(n))
    # alpha * x_i is increasing, so the nodes mapped inside [0, L] are a prefix
    m = int(np.count_nonzero((j < n - 1) | ((j == n - 1) & (r == 0.0))))
    j, r = j[:m], r[:m]
    j1 = np.minimum(j + 1, n - 1)
    out = np.zeros_like(rows)
    out[:, :m] = (1.0 - r) * rows[:, j] + r * rows[:, j1]
    return (params.b * params.alpha**2) * out


def pantograph_apply(f: GridFunction, params: ModelParams) -> GridFunction:
    return GridFunction(f.grid, pantograph_rows(f.values[None, :], params)[0])


def h_norm(space: SpaceTag, params: ModelParams) -> float:
    """Operator norm of the pantograph operator on the line.

    Substituting ``y = alpha x`` in ``int |b alpha^2 f(alpha x)|^p dx`` gives
    ``b alpha^(2 - 1/p)``; ``p = 1`` and ``p = inf`` are the two endpoints.
    """
    if space.kind == "L1":
        return params.b * params.alpha
    if space.kind == "Sup":
        return params.b * params.alpha**2
    return params.b * params.alpha ** (2.0 - 1.0 / space.p)


def generator_apply(f: GridFunction, params: ModelParams) -> GridFunction:
    """``-g f' + H f`` with second-order differences (one-sided at the ends).

    For residual diagnostics only; no solver steps with it.
    """
    dfdx = np.gradient(f.values, f.grid.h, edge_order=2)
    return GridFunction(f.grid, -params.g * dfdx + pantograph_apply(f, params).values)
