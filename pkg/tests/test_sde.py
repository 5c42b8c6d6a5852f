import math

import numpy as np
import pytest

import stopgame as sg
from stopgame.errors import BoundaryBelowDomain, ConfigError
from stopgame.sde import (PathConfig, _em_batch, first_hitting, rng_stream,
                          simulate_controlled, simulate_uncontrolled,
                          simulate_Y, skorokhod_reflect)


def test_path_config_validation():
    with pytest.raises(ConfigError):
        PathConfig(n_steps=0)
    with pytest.raises(ConfigError):
        PathConfig(n_steps=10, scheme="milstein")
    assert PathConfig(n_steps=200).dt(0.0, 1.0) == pytest.approx(1 / 200)


def test_seed_reproducibility(bench):
    cfg = PathConfig(n_steps=64, seed=99)
    p1 = simulate_uncontrolled(bench, 0.0, 2.0, cfg)
    p2 = simulate_uncontrolled(bench, 0.0, 2.0, cfg)
    assert p1.x.tobytes() == p2.x.tobytes()
    p3 = simulate_uncontrolled(bench, 0.0, 2.0, PathConfig(n_steps=64, seed=100))
    assert p1.x.tobytes() != p3.x.tobytes()


def test_driftless_real_line_increments():
    spec = sg.real_line_quadratic_spec(0.0, 0.0, 0.7, 0.0, 1.0, 0.0, alpha0=1.0)
    dt = 1.0 / 128
    rng = rng_stream(5, 0)
    dW = rng.standard_normal((100_000, 128)) * math.sqrt(dt)
    xs, clamps = _em_batch(spec.mu, spec.sigma, 0.3, dW, dt, None)
    assert clamps == 0
    incs = np.diff(xs, axis=1)
    assert incs.std() == pytest.approx(0.7 * math.sqrt(dt), rel=1e-2)
    drift = xs[:, -1].mean() - 0.3
    assert abs(drift) <= 3 * xs[:, -1].std() / math.sqrt(len(xs))


def test_gbm_mean(bench):
    dt = bench.T / 256
    rng = rng_stream(17, 0)
    dW = rng.standard_normal((100_000, 256)) * math.sqrt(dt)
    xs, _ = _em_batch(bench.mu, bench.sigma, 2.0, dW, dt, 0.0)
    mean, se = xs[:, -1].mean(), xs[:, -1].std() / math.sqrt(len(xs))
    assert abs(mean - 2.0 * math.exp(0.05 * bench.T)) <= 3 * se


def test_auxiliary_drift_mean(bench):
    dt = bench.T / 256
    rng = rng_stream(17, 0)
    dW = rng.standard_normal((100_000, 256)) * math.sqrt(dt)
    drift = lambda y: bench.mu(y) + bench.sigma(y) * bench.sigma_x(y)
    ys, _ = _em_batch(drift, bench.sigma, 2.0, dW, dt, 0.0)
    mean, se = ys[:, -1].mean(), ys[:, -1].std() / math.sqrt(len(ys))
    assert abs(mean - 2.0 * math.exp((0.05 + 0.16) * bench.T)) <= 3 * se


def test_y_equals_x_on_real_line():
    spec = sg.real_line_quadratic_spec(0.1, 0.05, 0.6, 0.0, 1.0, 0.0, alpha0=1.0)
    cfg = PathConfig(n_steps=100, seed=4)
    px = simulate_uncontrolled(spec, 0.0, 0.5, cfg)
    py = simulate_Y(spec, 0.0, 0.5, cfg)
    assert np.array_equal(px.x, py.x)  # sigma_x = 0 kills the extra drift


def test_half_line_clamp_rate_vanishes():
    spec = sg.benchmark_spec(1, 1, 0.05, 2.5, alpha0=1.0)  # violent volatility
    rates = []
    for n_steps in (8, 16, 32, 64):
        dt = spec.T / n_steps
        rng = rng_stream(23, 0)
        dW = rng.standard_normal((20_000, n_steps)) * math.sqrt(dt)
        _, clamps = _em_batch(spec.mu, spec.sigma, 1.0, dW, dt, 0.0)
        rates.append(clamps / (20_000 * n_steps))
    assert rates[0] > 0, "test instance should actually clamp at coarse dt"
    assert rates[-1] < 0.25 * rates[0]


# --- Skorokhod map -----------------------------------------------------------

def test_skorokhod_initial_jump():
    p = skorokhod_reflect(np.zeros(3), lambda t: 1.0, 0.0, 2.0)
    assert p.nu_values[0] == -1.0
    assert p.x_values[0] == 1.0


def test_skorokhod_untouched_boundary():
    inc = np.array([-0.1, -0.05, -0.2])
    p = skorokhod_reflect(inc, lambda t: 1.0, 0.0, 0.5)
    assert np.all(p.nu_values == 0.0)
    assert np.allclose(p.x_values, 0.5 + np.concatenate([[0], np.cumsum(inc)]))


def test_skorokhod_hand_run():
    p = skorokhod_reflect(np.array([0.3, 0.3, -0.2]), lambda t: 0.5, 0.0, 0.0)
    assert np.allclose(p.driver_cumsum, [0.0, 0.3, 0.6, 0.4])
    assert np.allclose(p.nu_values, [0.0, 0.0, -0.1, -0.1])
    assert np.allclose(p.x_values, [0.0, 0.3, 0.5, 0.3])


def test_skorokhod_invariants_random_drivers():
    rng = rng_stream(31, 0)
    inc = rng.standard_normal((10_000, 64)) * 0.1
    f_vals = 1.0 + 0.02 * np.arange(65)  # non-decreasing boundary
    p = skorokhod_reflect(inc, f_vals, 0.0, 0.8)
    assert np.max(p.x_values - f_vals[None, :]) <= 1e-12
    dnu = np.diff(p.nu_values, axis=1)
    assert np.max(dnu) <= 1e-15  # nu non-increasing
    pushes = dnu < -1e-15
    gap = np.abs(p.x_values[:, 1:] - f_vals[None, 1:])
    assert np.max(gap[pushes]) <= 1e-9  # flat off the boundary


def test_skorokhod_boundary_below_domain(bench):
    with pytest.raises(BoundaryBelowDomain):
        skorokhod_reflect(np.zeros((1, 4)), lambda t: -1.0, 0.0, 1.0,
                          spec=bench, dt=0.1)
    with pytest.raises(ConfigError):
        skorokhod_reflect(np.zeros(4), np.array([1.0, 0.9, 0.8, 0.7, 0.6]), 0.0, 1.0)


def test_skorokhod_monotone_in_boundary(bench):
    rng = rng_stream(77, 0)
    dW = rng.standard_normal((300, 128)) * math.sqrt(bench.T / 128)
    lo = skorokhod_reflect(dW, lambda t: 1.5, 0.0, 1.2, spec=bench, dt=bench.T / 128)
    hi = skorokhod_reflect(dW, lambda t: 1.8, 0.0, 1.2, spec=bench, dt=bench.T / 128)
    assert np.min(hi.x_values - lo.x_values) >= -1e-12


def test_one_pass_matches_picard(bench):
    dt = 1e-4
    rng = rng_stream(42, 0)
    dW = rng.standard_normal((20, 2000)) * math.sqrt(dt)
    one = skorokhod_reflect(dW, lambda t: 1.8, 0.0, 2.0, spec=bench, dt=dt)
    pic = skorokhod_reflect(dW, lambda t: 1.8, 0.0, 2.0, spec=bench, dt=dt,
                            picard=True, picard_tol=1e-13)
    assert np.max(np.abs(one.x_values - pic.x_values)) <= 1e-6


def test_reflected_state_stays_in_closed_inaction_region(bench, proj201, pair201):
    from stopgame.boundaries import interp_surface, step_values
    n_steps = 200
    dt = bench.T / n_steps
    times = dt * np.arange(n_steps + 1)
    f_vals = step_values(pair201.t_nodes, pair201.b, times)
    rng = rng_stream(13, 0)
    dW = rng.standard_normal((500, n_steps)) * math.sqrt(dt)
    p = skorokhod_reflect(dW, f_vals, 0.0, 1.3, spec=bench, dt=dt)
    worst = 0.0
    for k in range(n_steps + 1):
        row_vx = np.interp(p.x_values[:, k], proj201.grid.x_nodes,
                           proj201.vx[min(int(round(times[k] / proj201.grid.dt)),
                                          proj201.grid.n_t - 1)])
        worst = max(worst, float(np.max(row_vx)))
    assert worst <= bench.alpha0 + 0.02 * bench.alpha0


# --- hitting -----------------------------------------------------------------

def test_first_hitting_immediate():
    path = np.array([1.0, 2.0, 3.0])
    assert first_hitting(path, np.full(3, 1.5), "below_or_equal") == 0


def test_first_hitting_never():
    path = np.full(5, 5.0)
    assert first_hitting(path, np.full(5, 10.0), "at_or_above") is None


def test_first_hitting_unique_crossing():
    path = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    curve = np.full(5, 2.5)
    assert first_hitting(path, curve, "at_or_above") == 3
    assert first_hitting(-path, -curve, "below_or_equal") == 3


def test_first_hitting_batch():
    paths = np.array([[3.0, 2.0, 1.0], [3.0, 3.0, 3.0]])
    idx = first_hitting(paths, np.full((2, 3), 1.5), "below_or_equal")
    assert list(idx) == [2, -1]


# --- trajectory convexity ----------------------------------------------------

def test_trajectory_convexity_shared_driver(bench):
    rng = rng_stream(9, 0)
    n_steps = 128
    dnu1 = np.zeros(n_steps + 1); dnu1[40] = -0.3; dnu1[80] = 0.2
    dnu2 = np.zeros(n_steps + 1); dnu2[0] = -0.1; dnu2[60] = -0.2
    for _ in range(200):
        lam = rng.uniform(0, 1)
        x1, x2 = rng.uniform(0.5, 3.0, 2)
        seed = int(rng.integers(1 << 30))
        cfg = PathConfig(n_steps=n_steps, seed=seed)
        dW = rng_stream(seed, 0).standard_normal(n_steps) * math.sqrt(bench.T / n_steps)
        p1 = simulate_controlled(bench, 0.0, x1, cfg, dnu1, dW=dW)
        p2 = simulate_controlled(bench, 0.0, x2, cfg, dnu2, dW=dW)
        mix = lam * p1.applied_control + (1 - lam) * p2.applied_control
        pl = simulate_controlled(bench, 0.0, lam * x1 + (1 - lam) * x2, cfg, mix, dW=dW)
        stop = pl.exit_index if pl.exit_index is not None else n_steps + 1
        comb = lam * p1.x[:stop] + (1 - lam) * p2.x[:stop]
        assert np.all(comb >= pl.x[:stop] - 1e-9)
