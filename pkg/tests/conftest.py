"""Shared fixtures: the frozen benchmark instance and its (expensive) solves
are computed once per session and reused across test modules."""

import numpy as np
import pytest

import stopgame as sg

BENCH_XMAX = 4.2
BENCH_X0 = 1.33


@pytest.fixture(scope="session")
def bench():
    return sg.benchmark_spec(1, 1, 0.05, 0.4)


@pytest.fixture(scope="session")
def grid201(bench):
    return sg.build_grid(bench, sg.GridConfig(n_t=201, n_x=801, x_max=BENCH_XMAX))


@pytest.fixture(scope="session")
def grid101(bench):
    return sg.build_grid(bench, sg.GridConfig(n_t=101, n_x=401, x_max=BENCH_XMAX))


@pytest.fixture(scope="session")
def pen201(bench, grid201):
    return sg.solve_penalized(bench, grid201, sg.PenalizationParams(1e-3, 1e-3))


@pytest.fixture(scope="session")
def proj201(bench, grid201):
    return sg.solve_projected(bench, grid201)


@pytest.fixture(scope="session")
def pen101(bench, grid101):
    return sg.solve_penalized(bench, grid101, sg.PenalizationParams(1e-3, 1e-3))


@pytest.fixture(scope="session")
def proj101(bench, grid101):
    return sg.solve_projected(bench, grid101)


@pytest.fixture(scope="session")
def pair201(bench, proj201):
    return sg.extract_pair(proj201, bench)


@pytest.fixture(scope="session")
def pair101(bench, proj101):
    return sg.extract_pair(proj101, bench)


@pytest.fixture(scope="session")
def aux201(bench, grid201, pair201):
    return sg.solve_aux(bench, grid201, pair201.a)


@pytest.fixture(scope="session")
def degenerate_spec():
    """Theta <= 0 everywhere: h = -1, so the stopper quits immediately."""
    return sg.expr_spec(sg.Domain.HALF_LINE, mu="0.05*x", g="0", h="0*x - 1",
                        sigma1=0.4, r=0.02, alpha0=3.5, horizon=1.0)


@pytest.fixture(scope="session")
def pure_stopping_spec():
    """Control priced out of the game entirely."""
    return sg.benchmark_spec(1, 1, 0.05, 0.4, alpha0=1e6)


@pytest.fixture(scope="session")
def pure_stopping_surfaces(pure_stopping_spec):
    from stopgame.oracles import solve_stopping_psor
    grid = sg.build_grid(pure_stopping_spec,
                         sg.GridConfig(n_t=201, n_x=801, x_max=BENCH_XMAX))
    pen = sg.solve_penalized(pure_stopping_spec, grid, sg.PenalizationParams(1e-3, 1e-3))
    proj = sg.solve_projected(pure_stopping_spec, grid)
    psor = solve_stopping_psor(pure_stopping_spec, grid)
    return grid, pen, proj, psor
