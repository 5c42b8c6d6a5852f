import numpy as np
import pytest

import stopgame as sg
from stopgame.errors import ConfigError, WindowTooSmall


def test_build_grid_spacing(bench):
    grid = sg.build_grid(bench, sg.GridConfig(n_t=101, n_x=401, x_max=6.0))
    assert grid.dt == pytest.approx(bench.T / 100)
    assert grid.dx == pytest.approx(6.0 / 400)
    assert grid.t_nodes[0] == 0.0 and grid.t_nodes[-1] == bench.T
    assert grid.x_nodes[0] == 0.0


def test_window_too_small(bench):
    with pytest.raises(WindowTooSmall):
        sg.build_grid(bench, sg.GridConfig(n_t=11, n_x=11, x_max=0.5))
    # exactly at the margin is still too small
    with pytest.raises(WindowTooSmall):
        sg.build_grid(bench, sg.GridConfig(n_t=11, n_x=11, x_max=2.0))


def test_real_line_symmetric_window():
    spec = sg.real_line_quadratic_spec(-0.2, 0.0, 0.5, 0.0, 1.0, 0.0,
                                       g_scale=-0.2, g_rate=-1.0, alpha0=1.0)
    grid = sg.build_grid(spec, sg.GridConfig(n_t=11, n_x=501, x_min=-5.0, x_max=5.0))
    assert grid.dx == pytest.approx(0.02)


def test_half_line_floor_is_zero(bench):
    with pytest.raises(ConfigError):
        sg.build_grid(bench, sg.GridConfig(n_t=11, n_x=11, x_min=0.5, x_max=6.0))


def test_doubling_nx_halves_dx(bench):
    g1 = sg.build_grid(bench, sg.GridConfig(n_t=11, n_x=401, x_max=6.0))
    g2 = sg.build_grid(bench, sg.GridConfig(n_t=11, n_x=801, x_max=6.0))
    assert g2.dx == pytest.approx(g1.dx * 400 / 800)
    # with node counts chosen so the cell count doubles exactly
    g3 = sg.build_grid(bench, sg.GridConfig(n_t=11, n_x=801, x_max=6.0))
    assert np.array_equal(g2.x_nodes, g3.x_nodes)


def test_bit_reproducible_nodes(bench):
    cfg = sg.GridConfig(n_t=37, n_x=53, x_max=4.9)
    a = sg.build_grid(bench, cfg)
    b = sg.build_grid(bench, cfg)
    assert a.t_nodes.tobytes() == b.t_nodes.tobytes()
    assert a.x_nodes.tobytes() == b.x_nodes.tobytes()


def test_truncation_margin_recorded(bench):
    grid = sg.build_grid(bench, sg.GridConfig(n_t=11, n_x=11, x_max=6.0))
    assert grid.truncation_margin == pytest.approx(6.0, rel=1e-6)


def test_degenerate_trigger_passes_with_warning(degenerate_spec):
    with pytest.warns(UserWarning):
        grid = sg.build_grid(degenerate_spec, sg.GridConfig(n_t=11, n_x=11, x_max=1.0))
    assert grid.n_x == 11


def test_invalid_counts(bench):
    with pytest.raises(ConfigError):
        sg.build_grid(bench, sg.GridConfig(n_t=1, n_x=11, x_max=6.0))
    with pytest.raises(ConfigError):
        sg.build_grid(bench, sg.GridConfig(n_t=11, n_x=2, x_max=6.0))
    with pytest.raises(ConfigError):
        sg.build_grid(bench, sg.GridConfig(n_t=11, n_x=11, x_max=6.0, right_bc="weird"))
