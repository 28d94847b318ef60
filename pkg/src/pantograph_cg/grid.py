"""Spatial discretization for the cell growth equation.

A `Grid` is a uniform mesh on ``[0, L]``. Functions sampled on it
(`GridFunction`) are understood to vanish outside ``[0, L]``, which is how
the half-line problem with its zero boundary condition is embedded in the
whole real line. All spatial integrals use the composite trapezoid rule and
all off-node evaluation is piecewise linear, so non-negative data stay
non-negative under every operation in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "HorizonError",
    "ModelParams",
    "Grid",
    "GridFunction",
    "SpaceTag",
    "L1",
    "SUP",
    "Trajectory",
    "make_grid",
    "eval_extended",
    "norm",
    "total_mass",
    "make_initial",
    "support_max",
    "check_horizon",
]

_INTEGRAL_TOL = 1e-9


class HorizonError(ValueError):
    """The domain is too short for the requested evolution time."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the cell growth equation.

    Attributes
    ----------
    g : float
        Growth rate (size per unit time), must be positive.
    b : float
        Division rate. ``b = 0`` is accepted and reduces the model to pure
        transport, which is a useful degenerate test case.
    mu : float
        Death rate. Only enters through the factor ``exp(-(b + mu) t)``
        relating the transformed unknown ``u`` to the density ``n``.
    alpha : float
        Number of daughter cells per division, must exceed 1.
    """

    g: float
    b: float
    mu: float = 0.0
    alpha: float = 2.0

    def __post_init__(self):
        for name in ("g", "b", "mu", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.g <= 0:
            raise ValueError(f"growth rate g must be positive, got {self.g}")
        if self.b < 0:
            raise ValueError(f"division rate b must be non-negative, got {self.b}")
        if self.mu < 0:
            raise ValueError(f"death rate mu must be non-negative, got {self.mu}")
        if self.alpha <= 1:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")

    @property
    def growth_exponent(self) -> float:
        """Exponential rate ``b * alpha`` of the total mass of ``u``."""
        return self.b * self.alpha


@dataclass(frozen=True)
class Grid:
    """Uniform nodes ``x_i = i * h`` for ``i = 0 .. n_points - 1``."""

    L: float
    h: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 3:
            raise ValueError("a grid needs at least 3 points")
        if not (self.h > 0 and self.L > 0):
            raise ValueError("L and h must be positive")

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) * self.h

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n_points))


def make_grid(L: float, h: float) -> Grid:
    """Build the uniform grid on ``[0, L]`` with spacing ``h``.

    Raises ``ValueError`` unless ``L / h`` is an integer to within 1e-9.
    """
    if not (L > 0 and h > 0):
        raise ValueError(f"L and h must be positive, got L={L}, h={h}")
    ratio = L / h
    m = round(ratio)
    if abs(ratio - m) > _INTEGRAL_TOL * max(1.0, ratio):
        raise ValueError(f"L/h = {ratio!r} is not an integer")
    return Grid(L=float(L), h=float(h), n_points=int(m) + 1)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a function of size sampled on a `Grid`.

    The array is copied on construction and marked read-only.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} values, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]):
        return cls(grid, fn(grid.x))

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._coerce(other))

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


@dataclass(frozen=True)
class SpaceTag:
    """Which function space a norm is taken in: ``"L1"``, ``"Lp"`` or ``"Sup"``."""

    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("L1", "Lp", "Sup"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.kind == "Lp":
            if self.p is None or not (1 < self.p < math.inf):
                raise ValueError("Lp needs 1 < p < inf")
        elif self.p is not None:
            raise ValueError(f"{self.kind} takes no exponent")

    @classmethod
    def lp(cls, p: float) -> "SpaceTag":
        return cls("Lp", float(p))

    @classmethod
    def parse(cls, text: str) -> "SpaceTag":
        """Parse ``l1``, ``sup`` or ``lp:<p>`` (case-insensitive)."""
        t = text.strip().lower()
        if t == "l1":
            return L1
        if t in ("sup", "linf"):
            return SUP
        if t.startswith("lp:"):
            return cls.lp(float(t[3:]))
        raise ValueError(f"unrecognised space {text!r}; use l1, sup or lp:<p>")

    def __str__(self):
        return f"Lp(p={self.p:g})" if self.kind == "Lp" else self.kind


L1 = SpaceTag("L1")
SUP = SpaceTag("Sup")


def eval_extended(f: GridFunction, x):
    """Evaluate `f` at ``x`` with zero extension outside ``[0, L]``.

    Piecewise linear between nodes and exact at nodes. Accepts a scalar or
    an array of query points.
    """
    grid = f.grid
    out = np.interp(x, grid.x, f.values, left=0.0, right=0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _trapezoid(values: np.ndarray, h: float) -> float:
    # np.sum order depends only on the length, so results are reproducible
    return h * (float(np.sum(values[1:-1])) + 0.5 * (values[0] + values[-1]))


def norm(f: GridFunction, space: SpaceTag = L1) -> float:
    a = np.abs(f.values)
    if space.kind == "Sup":
        return float(a.max())
    if space.kind == "L1":
        return _trapezoid(a, f.grid.h)
    return _trapezoid(a**space.p, f.grid.h) ** (1.0 / space.p)


def total_mass(f: GridFunction) -> float:
    """Signed trapezoid integral of `f` over ``[0, L]``."""
    return _trapezoid(f.values, f.grid.h)


def support_max(f: GridFunction) -> float:
    """Largest node at which `f` is non-zero (0.0 for the zero function)."""
    nz = np.flatnonzero(f.values)
    return float(nz[-1] * f.grid.h) if nz.size else 0.0


def check_horizon(
    f: GridFunction, g: float, t: float, outflow_tol: float = 0.0
) -> None:
    """Reject an evolution of `f` over time `t` that would leave ``[0, L]``.

    Transport moves support right by ``g t`` and the division term only
    shrinks it, so with ``outflow_tol = 0`` the requirement is
    ``L >= support_max(f) + g t``.

    With ``outflow_tol > 0`` the check is relaxed to a bound on the mass that
    can escape: only material initially in ``[L - g t, L]`` can cross ``L``,
    and its descendants grow no faster than the whole population. So the
    relative mass lost is at most the relative mass of ``|f|`` in that strip,
    which must not exceed `outflow_tol`.
    """
    grid = f.grid
    if outflow_tol <= 0.0:
        reach = support_max(f) + g * t
        if reach > grid.L * (1 + 1e-12):
            raise HorizonError(
                f"support reaches {reach:g} > L = {grid.L:g} by t = {t:g}"
            )
        return
    a = np.abs(f.values)
    total = _trapezoid(a, grid.h)
    if total == 0.0:
        return
    start = max(0, int(math.floor((grid.L - g * t) / grid.h)))
    strip = a[start:]
    escaping = _trapezoid(strip, grid.h) if strip.size > 1 else 0.5 * grid.h * strip.sum()
    if escaping > outflow_tol * total:
        raise HorizonError(
            f"relative mass {escaping / total:.3g} within g*t of L exceeds "
            f"outflow tolerance {outflow_tol:g}"
        )


# -- initial data -----------------------------------------------------------


def _hat(x, center, width):
    return np.clip(1.0 - np.abs(x - center) / (0.5 * width), 0.0, None)


def _indicator(x, a, b):
    return ((x >= a) & (x <= b)).astype(float)


def _gaussian_truncated(x, mean, sigma):
    # cut at 3 sigma and lifted so the profile is continuous
    z = (x - mean) / sigma
    edge = math.exp(-4.5)
    return np.where(np.abs(z) <= 3.0, np.exp(-0.5 * z * z) - edge, 0.0).clip(0.0)


_PRESETS = {
    "hat": (_hat, lambda c, w: (c - 0.5 * w, c + 0.5 * w), ("center", "width")),
    "indicator": (_indicator, lambda a, b: (a, b), ("a", "b")),
    "gaussian_truncated": (
        _gaussian_truncated,
        lambda m, s: (m - 3 * s, m + 3 * s),
        ("mean", "sigma"),
    ),
}


def make_initial(preset: str, params: Sequence[float], grid: Grid) -> GridFunction:
    """Sample a unit-mass initial distribution.

    Parameters
    ----------
    preset : {"hat", "indicator", "gaussian_truncated"}
        ``hat(center, width)`` is a triangle on ``[center - width/2,
        center + width/2]``; ``indicator(a, b)`` is constant on ``[a, b]``;
        ``gaussian_truncated(mean, sigma)`` is a Gaussian cut at three
        standard deviations and shifted down to be continuous.
    params : sequence of float
        The two shape parameters of the preset.
    grid : Grid

    Returns
    -------
    GridFunction
        Non-negative samples rescaled so that `total_mass` is 1.

    Raises
    ------
    ValueError
        For an unknown preset, wrong parameter count, degenerate shape, or a
        support that is not strictly inside ``(0, L)``.
    """
    try:
        fn, support, names = _PRESETS[preset]
    except KeyError:
        raise ValueError(
            f"unknown preset {preset!r}; choose from {sorted(_PRESETS)}"
        ) from None
    params = [float(p) for p in params]
    if len(params) != len(names):
        raise ValueError(f"{preset} takes parameters {names}, got {params}")
    if params[1] <= (params[0] if preset == "indicator" else 0.0):
        raise ValueError(f"degenerate {preset} parameters {params}")
    lo, hi = support(*params)
    if lo <= 0.0 or hi >= grid.L:
        raise ValueError(
            f"{preset} support [{lo:g}, {hi:g}] must lie strictly inside (0, {grid.L:g})"
        )
    values = fn(grid.x, *params)
    values[0] = 0.0
    mass = _trapezoid(values, grid.h)
    if mass <= 0.0:
        raise ValueError(f"{preset}{tuple(params)} is not resolved by h = {grid.h:g}")
    return GridFunction(grid, values / mass)


# -- trajectories -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-ordered snapshots of a solution on one grid.

    ``solver_tag`` records which solver produced it (``"dp"``, ``"fd"``, or a
    free-form tag for derived trajectories).
    """

    times: np.ndarray
    snapshots: list[GridFunction]
    params: ModelParams
    solver_tag: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if len(times) != len(self.snapshots):
            raise ValueError("times and snapshots differ in length")
        if len(times) and np.any(np.diff(times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if self.snapshots:
            g0 = self.snapshots[0].grid
            if any(s.grid != g0 for s in self.snapshots):
                raise ValueError("snapshots must share one grid")
        times.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "snapshots", list(self.snapshots))

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    def __len__(self):
        return len(self.times)

    def as_array(self) -> np.ndarray:
        return np.stack([s.values for s in self.snapshots])
