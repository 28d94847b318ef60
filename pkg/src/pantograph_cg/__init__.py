"""Solvers for the cell growth equation with a pantograph division term.

The equation ``n_t + g n_x = b alpha^2 n(alpha x, t) - (b + mu) n`` on
``x > 0`` with ``n(0, t) = 0`` is solved in the variable
``u = exp((b + mu) t) n`` by a Dyson-Phillips series with a certified
remainder bound (:mod:`.dyson_phillips`), cross-checked by an upwind
finite-difference scheme (:mod:`.reference`), and its long-time profile is
estimated by Cesaro and Abel means (:mod:`.asymptotics`).
"""

from .asymptotics import (
    CesaroEstimate,
    ResolventEstimate,
    cesaro_mean,
    rescaled_dp_trajectory,
    rescaled_trajectory,
    resolvent_apply,
    y_estimate,
)
from .dyson_phillips import (
    SeriesConfig,
    SeriesResult,
    dp_solve,
    dp_term,
    dp_trajectory,
    truncation_bound,
)
from .grid import (
    L1,
    SUP,
    Grid,
    GridFunction,
    HorizonError,
    ModelParams,
    SpaceTag,
    Trajectory,
    eval_extended,
    make_grid,
    make_initial,
    norm,
    total_mass,
)
from .operators import generator_apply, h_norm, pantograph_apply, shift_apply
from .reference import FDConfig, fd_solve, pde_residual, recover_n

__version__ = "0.1.0"
