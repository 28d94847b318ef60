import numpy as np
import pytest

from pantograph_cg import ModelParams, SeriesConfig, dp_solve, make_grid, make_initial

# reference configuration used throughout: g=1, b=1, mu=0, alpha=2,
# unit-mass hat centred at 1 of width 1, L=10, h=1e-3
CSTAR = ModelParams(g=1.0, b=1.0, mu=0.0, alpha=2.0)


def hat_exact(x, center=1.0, width=1.0):
    """Analytic unit-mass triangle, independent of the grid code."""
    half = 0.5 * width
    return np.clip(1.0 - np.abs(np.asarray(x) - center) / half, 0.0, None) / half


@pytest.fixture(scope="session")
def cstar_params():
    return CSTAR


@pytest.fixture(scope="session")
def cstar_grid():
    return make_grid(10.0, 1e-3)


@pytest.fixture(scope="session")
def cstar_u0(cstar_grid):
    return make_initial("hat", [1.0, 1.0], cstar_grid)


@pytest.fixture(scope="session")
def cstar_dp(cstar_u0):
    return dp_solve(cstar_u0, CSTAR, SeriesConfig(t_final=1.0, tol=1e-6))


# criterion id -> (passed, detail), filled by test_acceptance
RESULTS: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")

