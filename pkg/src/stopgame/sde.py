"""Path simulation: uncontrolled and auxiliary diffusions, controlled paths,
the discrete Skorokhod reflection map along a moving boundary, and
first-hitting detection.

RNG and seeding rule (pinned for bit-reproducibility): numpy PCG64 streams
keyed by ``SeedSequence((seed, stream_index))``; stream_index is the path
index for single-path simulations and the block index for batched Monte
Carlo.  Identical (config, seed) therefore reproduces identical bytes
regardless of scheduling.

Boundary curves given at grid times are extended between nodes as
left-continuous step functions (the value at the next grid time), matching
the left-continuity of the action boundary.  Hitting is checked at grid
times only; the induced O(sqrt(dt)) bias is absorbed by the Monte Carlo
tolerance allowances downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import BoundaryBelowDomain, ConfigError
from .model import Domain, GameSpec

__all__ = [
    "PathConfig", "Path", "ReflectedPath", "rng_stream",
    "simulate_uncontrolled", "simulate_Y", "simulate_controlled",
    "skorokhod_reflect", "first_hitting",
]


@dataclass(frozen=True)
class PathConfig:
    n_steps: int
    seed: int = 0
    scheme: str = "euler_maruyama"

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if self.scheme != "euler_maruyama":
            raise ConfigError(f"unsupported scheme {self.scheme!r}")

    def dt(self, t0: float, horizon: float) -> float:
        return (horizon - t0) / self.n_steps


def rng_stream(seed: int, index: int) -> np.random.Generator:
    """The package-wide splittable seeding rule."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, index))))


@dataclass
class Path:
    times: np.ndarray
    x: np.ndarray
    clamp_events: int = 0
    exit_index: Optional[int] = None
    applied_control: Optional[np.ndarray] = None  # increments after exit-freeze


@dataclass
class ReflectedPath:
    times: np.ndarray
    x_values: np.ndarray
    nu_values: np.ndarray      # non-increasing; nu[0] = -(x0 - f(t0))^+
    driver_cumsum: np.ndarray  # un-reflected drift+noise accumulator


def _em_batch(mu_fn: Callable, sigma_fn: Callable, x0, dW: np.ndarray, dt: float,
              clamp_floor: Optional[float]) -> tuple[np.ndarray, int]:
    """Euler-Maruyama over the leading path axis; dW has shape (..., n)."""
    n = dW.shape[-1]
    out = np.empty(dW.shape[:-1] + (n + 1,))
    state = np.broadcast_to(np.asarray(x0, dtype=float), dW.shape[:-1]).copy()
    out[..., 0] = state
    clamps = 0
    for k in range(n):
        state = state + mu_fn(state) * dt + sigma_fn(state) * dW[..., k]
        if clamp_floor is not None:
            below = state < clamp_floor
            if np.any(below):
                clamps += int(np.count_nonzero(below))
                state = np.where(below, clamp_floor, state)
        out[..., k + 1] = state
    return out, clamps


def simulate_uncontrolled(spec: GameSpec, t0: float, x0: float,
                          cfg: PathConfig) -> Path:
    """Euler-Maruyama path of dX = mu(X) ds + sigma(X) dW.

    Half-line paths clamp at 0 only when a step overshoots below 0; the
    clamp count is recorded (the rate must vanish as dt -> 0 because the
    origin is unattainable).
    """
    dt = cfg.dt(t0, spec.T)
    rng = rng_stream(cfg.seed, 0)
    dW = rng.standard_normal(cfg.n_steps) * math.sqrt(dt)
    floor = 0.0 if spec.domain is Domain.HALF_LINE else None
    xs, clamps = _em_batch(spec.mu, spec.sigma, x0, dW, dt, floor)
    times = t0 + dt * np.arange(cfg.n_steps + 1)
    return Path(times, xs, clamps)


def simulate_Y(spec: GameSpec, t0: float, y0: float, cfg: PathConfig) -> Path:
    """Euler-Maruyama for dY = (mu(Y) + sigma(Y) sigma_x(Y)) ds + sigma(Y) dW."""
    dt = cfg.dt(t0, spec.T)
    rng = rng_stream(cfg.seed, 0)
    dW = rng.standard_normal(cfg.n_steps) * math.sqrt(dt)
    drift = lambda y: spec.mu(y) + spec.sigma(y) * spec.sigma_x(y)
    floor = 0.0 if spec.domain is Domain.HALF_LINE else None
    ys, clamps = _em_batch(drift, spec.sigma, y0, dW, dt, floor)
    times = t0 + dt * np.arange(cfg.n_steps + 1)
    return Path(times, ys, clamps)


def simulate_controlled(spec: GameSpec, t0: float, x0: float, cfg: PathConfig,
                        control_increments: np.ndarray,
                        dW: Optional[np.ndarray] = None) -> Path:
    """Path of dX = mu dt + sigma dW + dnu for a deterministic control.

    ``control_increments`` has length n_steps + 1; entry 0 is the jump at
    time zero.  On the half line the state is absorbed at zero: the first
    step at or below 0 freezes both the state and the control thereafter.
    """
    dt = cfg.dt(t0, spec.T)
    if dW is None:
        rng = rng_stream(cfg.seed, 0)
        dW = rng.standard_normal(cfg.n_steps) * math.sqrt(dt)
    dnu = np.asarray(control_increments, dtype=float)
    if len(dnu) != cfg.n_steps + 1:
        raise ConfigError("control_increments must have length n_steps + 1")
    xs = np.empty(cfg.n_steps + 1)
    applied = np.zeros(cfg.n_steps + 1)
    state = x0 + dnu[0]
    applied[0] = dnu[0]
    exit_index = None
    half = spec.domain is Domain.HALF_LINE
    if half and state <= 0.0:
        state, exit_index = 0.0, 0
    xs[0] = state
    for k in range(1, cfg.n_steps + 1):
        if exit_index is None:
            state = state + float(spec.mu(state)) * dt \
                + float(spec.sigma(state)) * dW[k - 1] + dnu[k]
            applied[k] = dnu[k]
            if half and state <= 0.0:
                state, exit_index = 0.0, k
        xs[k] = state
    times = t0 + dt * np.arange(cfg.n_steps + 1)
    return Path(times, xs, exit_index=exit_index, applied_control=applied)


def _boundary_array(f, times: np.ndarray) -> np.ndarray:
    if callable(f):
        return np.asarray([f(t) for t in times], dtype=float)
    arr = np.asarray(f, dtype=float)
    if arr.shape != times.shape:
        raise ConfigError("boundary array must align with path times")
    return arr


def skorokhod_reflect(driver_increments: np.ndarray, f, t0: float, x0,
                      *, spec: Optional[GameSpec] = None, dt: Optional[float] = None,
                      picard: bool = False, picard_tol: float = 1e-12,
                      picard_max: int = 200) -> ReflectedPath:
    """Discrete Skorokhod map along a non-decreasing boundary.

    With ``spec`` given, ``driver_increments`` are Brownian increments and
    each step accumulates mu(X) dt + sigma(X) dW using the current reflected
    state (one-pass recursion); without it they are used verbatim as the
    combined drift+noise driver.  Per step the running maximum
    M_k = max(M_{k-1}, (x0 + cumsum_k - f(t_k))^+) gives nu_k = -M_k and
    X_k = x0 + cumsum_k + nu_k.

    ``picard=True`` recomputes the pair by whole-path fixed-point iteration
    (coefficients frozen along the previous iterate); used to confirm the
    one-pass recursion against the constructive existence argument.
    """
    inc = np.atleast_2d(np.asarray(driver_increments, dtype=float))
    n_paths, n = inc.shape
    if spec is not None and dt is None:
        raise ConfigError("state-dependent reflection needs dt")
    times = t0 + (dt if dt is not None else 1.0) * np.arange(n + 1)
    f_vals = _boundary_array(f, times)
    lo = -math.inf if spec is None else spec.domain.infimum
    if np.any(f_vals < lo):
        raise BoundaryBelowDomain("reflection boundary dips below the state space")
    finite = np.isfinite(f_vals)
    if np.any(np.diff(f_vals[finite]) < -1e-12):
        raise ConfigError("reflection boundary must be non-decreasing")

    x0_arr = np.broadcast_to(np.asarray(x0, dtype=float), (n_paths,)).copy()

    if spec is None:
        cums = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(inc, axis=1)], axis=1)
        excess = np.maximum(x0_arr[:, None] + cums - f_vals[None, :], 0.0)
        m = np.maximum.accumulate(excess, axis=1)
        nu = -m
        xs = x0_arr[:, None] + cums + nu
    elif not picard:
        xs = np.empty((n_paths, n + 1))
        nu = np.empty((n_paths, n + 1))
        cums = np.empty((n_paths, n + 1))
        m = np.maximum(x0_arr - f_vals[0], 0.0)
        cum = np.zeros(n_paths)
        cums[:, 0] = 0.0
        nu[:, 0] = -m
        state = x0_arr - m
        xs[:, 0] = state
        for k in range(1, n + 1):
            cum = cum + spec.mu(state) * dt + spec.sigma(state) * inc[:, k - 1]
            m = np.maximum(m, x0_arr + cum - f_vals[k])
            state = x0_arr + cum - m
            cums[:, k] = cum
            nu[:, k] = -m
            xs[:, k] = state
    else:
        state = np.full((n_paths, n + 1), np.minimum(x0_arr, f_vals[0])[:, None])
        for _ in range(picard_max):
            drift = spec.mu(state[:, :-1]) * dt + spec.sigma(state[:, :-1]) * inc
            cums = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(drift, axis=1)], axis=1)
            excess = np.maximum(x0_arr[:, None] + cums - f_vals[None, :], 0.0)
            m = np.maximum.accumulate(excess, axis=1)
            new_state = x0_arr[:, None] + cums - m
            delta = float(np.max(np.abs(new_state - state)))
            state = new_state
            if delta < picard_tol:
                break
        nu = -m
        xs = state

    if np.ndim(driver_increments) == 1:
        return ReflectedPath(times, xs[0], nu[0], cums[0])
    return ReflectedPath(times, xs, nu, cums)


def first_hitting(path_values: np.ndarray, threshold_curve: np.ndarray,
                  side: str) -> Optional[Union[int, np.ndarray]]:
    """Smallest index where the comparison holds; None when it never does.

    ``side`` is "below_or_equal" or "at_or_above".  The curve must be
    defined at the path times.  For 2-d inputs (paths in rows) returns an
    int array with -1 marking "never"; callers map never -> horizon per the
    inf(empty) = T - t convention.
    """
    vals = np.asarray(path_values, dtype=float)
    curve = np.asarray(threshold_curve, dtype=float)
    if side == "below_or_equal":
        hit = vals <= curve
    elif side == "at_or_above":
        hit = vals >= curve
    else:
        raise ConfigError(f"unknown side {side!r}")
    if vals.ndim == 1:
        idx = np.nonzero(hit)[0]
        return int(idx[0]) if len(idx) else None
    any_hit = hit.any(axis=1)
    first = np.argmax(hit, axis=1)
    return np.where(any_hit, first, -1)
