"""Monte Carlo evaluation of the game payoff and verification of the
saddle-point inequalities for the boundary-built strategy pair.

The candidate equilibrium stops when the state drops to the stopping
boundary and controls by Skorokhod reflection at the action boundary.  The
suite estimates the payoff for that pair and for a finite menu of unilateral
deviations, under common random numbers, and asserts the two inequality
directions within 3 pooled standard errors plus a discretization allowance
c * (sqrt(dt) + dx).  The saddle property is only ever verified against the
menu, never universally.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .boundaries import (BoundaryPair, absorption_staircase, interp_surface,
                         step_values)
from .errors import ConfigError, PreconditionFailure
from .grid import GridConfig
from .model import Domain, GameSpec
from .sde import first_hitting, rng_stream
from .vi_solver import ValueSurface

__all__ = [
    "StopRule", "ControlRule", "StrategyPair", "StrategyResult", "SaddleReport",
    "payoff", "estimate_value", "deviation_suite", "calibrate_allowance",
]

_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class StopRule:
    kind: str                      # "hit_boundary" | "fixed_time" | "threshold_shift"
    t_nodes: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    time: float = math.inf
    shift: float = 0.0

    @classmethod
    def hit_boundary(cls, t_nodes, values):
        return cls("hit_boundary", np.asarray(t_nodes, float), np.asarray(values, float))

    @classmethod
    def fixed_time(cls, s: float):
        return cls("fixed_time", time=float(s))

    @classmethod
    def threshold_shift(cls, t_nodes, values, shift: float):
        return cls("threshold_shift", np.asarray(t_nodes, float),
                   np.asarray(values, float), shift=float(shift))


@dataclass(frozen=True, eq=False)
class ControlRule:
    kind: str                      # "reflect" | "none" | "reflect_shifted" | "reflect_constant"
    t_nodes: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    shift: float = 0.0
    level: float = math.inf

    @classmethod
    def reflect(cls, t_nodes, values):
        return cls("reflect", np.asarray(t_nodes, float), np.asarray(values, float))

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def reflect_shifted(cls, t_nodes, values, shift: float):
        return cls("reflect_shifted", np.asarray(t_nodes, float),
                   np.asarray(values, float), shift=float(shift))

    @classmethod
    def reflect_constant(cls, level: float):
        return cls("reflect_constant", level=float(level))


@dataclass(frozen=True, eq=False)
class StrategyPair:
    stop: StopRule
    control: ControlRule
    name: str = ""


def _simulate_block(spec: GameSpec, x0: float, dt: float, dW: np.ndarray,
                    f_vals: Optional[np.ndarray]):
    """Controlled (reflected or uncontrolled) paths over one path block.

    Returns (states, nu, exit_idx); exit_idx = n when the path never leaves
    the half line (or on the real line).  After exit the state and control
    freeze, and payoff accrual stops there anyway.
    """
    n_paths, n = dW.shape
    half = spec.domain is Domain.HALF_LINE
    xs = np.empty((n_paths, n + 1))
    nu = np.zeros((n_paths, n + 1))
    exit_idx = np.full(n_paths, n, dtype=np.int64)
    alive = np.ones(n_paths, dtype=bool)

    reflecting = f_vals is not None
    if reflecting:
        m = np.maximum(x0 - f_vals[0], 0.0) * np.ones(n_paths)
        cum = np.zeros(n_paths)
        state = x0 - m
        nu[:, 0] = -m
    else:
        state = np.full(n_paths, float(x0))
    if half:
        dead = state <= 0.0
        if dead.any():
            exit_idx[dead] = 0
            state = np.where(dead, 0.0, state)
            alive &= ~dead
    xs[:, 0] = state

    for k in range(1, n + 1):
        drift = spec.mu(state) * dt + spec.sigma(state) * dW[:, k - 1]
        if reflecting:
            cum = np.where(alive, cum + drift, cum)
            m = np.where(alive, np.maximum(m, x0 + cum - f_vals[k]), m)
            new_state = np.where(alive, x0 + cum - m, state)
            nu[:, k] = -m
        else:
            new_state = np.where(alive, state + drift, state)
        if half:
            newly = alive & (new_state <= 0.0)
            if newly.any():
                exit_idx[newly] = k
                new_state = np.where(newly, 0.0, new_state)
                alive &= ~newly
        state = new_state
        xs[:, k] = state
    return xs, nu, exit_idx


def _payoff_core(spec: GameSpec, t0: float, dt: float, xs: np.ndarray,
                 nu: Optional[np.ndarray], m_idx: np.ndarray) -> np.ndarray:
    """Discounted payoff per path, cut at the per-path index m_idx.

    terminal g + trapezoidal running h + Stieltjes control cost including
    the time-zero jump of nu at full weight.
    """
    n = xs.shape[1] - 1
    s = dt * np.arange(n + 1)
    disc = np.exp(-spec.r * s)
    g_at = np.asarray(spec.g(t0 + s), dtype=float)
    terminal = disc[m_idx] * g_at[m_idx]

    integrand = disc * np.asarray(spec.h(t0 + s, xs), dtype=float)
    seg = 0.5 * (integrand[:, 1:] + integrand[:, :-1]) * dt
    running = np.concatenate([np.zeros((xs.shape[0], 1)), np.cumsum(seg, axis=1)], axis=1)
    run_term = np.take_along_axis(running, m_idx[:, None], axis=1)[:, 0]

    cost = 0.0
    if nu is not None:
        dnu = np.abs(np.diff(nu, axis=1, prepend=0.0))
        charges = np.cumsum(disc * dnu, axis=1)
        cost = spec.alpha0 * np.take_along_axis(charges, m_idx[:, None], axis=1)[:, 0]
    return terminal + run_term + cost


def payoff(spec: GameSpec, path, nu, stop_index: Optional[int]) -> float:
    """Payoff along a single path (ReflectedPath, Path, or bare array with a
    ``times`` companion).  ``stop_index=None`` means the horizon; the
    effective cut is min(stop, half-line exit)."""
    times = path.times
    xs = np.asarray(getattr(path, "x_values", getattr(path, "x", path)), dtype=float)
    t0 = float(times[0])
    dt = float(times[1] - times[0])
    n = len(xs) - 1
    stop = n if stop_index is None else int(stop_index)
    if stop > n:
        raise ConfigError("stop_index beyond the path length")
    exit_idx = getattr(path, "exit_index", None)
    if exit_idx is None and spec.domain is Domain.HALF_LINE:
        hit = first_hitting(xs, np.zeros(n + 1), "below_or_equal")
        exit_idx = hit if hit is not None else n
    if exit_idx is None:
        exit_idx = n
    m_idx = np.asarray([min(stop, exit_idx)], dtype=np.int64)
    nu_arr = None if nu is None else np.asarray(nu, dtype=float)[None, :]
    return float(_payoff_core(spec, t0, dt, xs[None, :], nu_arr, m_idx)[0])


def _stop_indices(rule: StopRule, xs: np.ndarray, times: np.ndarray, dt: float) -> np.ndarray:
    n = xs.shape[1] - 1
    if rule.kind == "fixed_time":
        k = int(np.clip(round(rule.time / dt), 0, n))
        return np.full(xs.shape[0], k, dtype=np.int64)
    curve = step_values(rule.t_nodes, absorption_staircase(rule.values), times) + rule.shift
    idx = first_hitting(xs, np.broadcast_to(curve, xs.shape), "below_or_equal")
    return np.where(idx < 0, n, idx).astype(np.int64)


def _control_boundary(rule: ControlRule, times: np.ndarray) -> Optional[np.ndarray]:
    if rule.kind == "none":
        return None
    if rule.kind == "reflect_constant":
        return np.full(len(times), rule.level)
    return step_values(rule.t_nodes, rule.values, times) + rule.shift


def _payoff_samples(spec: GameSpec, pair: StrategyPair, t0: float, x0: float,
                    n_paths: int, seed: int, n_steps: int,
                    antithetic: bool = False, threads: int = 1) -> np.ndarray:
    if not spec.domain.contains_closure(x0) or x0 == spec.domain.infimum:
        raise ConfigError("x0 must lie inside the state space")
    dt = (spec.T - t0) / n_steps
    times = t0 + dt * np.arange(n_steps + 1)
    f_vals = _control_boundary(pair.control, times)
    out = np.empty(n_paths)
    blocks = [(b, start, min(_BLOCK, n_paths - start))
              for b, start in enumerate(range(0, n_paths, _BLOCK))]

    def run_block(block):
        b, start, bs = block
        rng = rng_stream(seed, b)
        z = rng.standard_normal((bs, n_steps))
        if antithetic:
            half_rows = z[1::2].shape[0]
            z[1::2] = -z[0::2][:half_rows]
        dW = z * math.sqrt(dt)
        xs, nu, exit_idx = _simulate_block(spec, x0, dt, dW, f_vals)
        stop_idx = _stop_indices(pair.stop, xs, times, dt)
        m_idx = np.minimum(stop_idx, exit_idx)
        nu_arr = nu if f_vals is not None else None
        out[start:start + bs] = _payoff_core(spec, t0, dt, xs, nu_arr, m_idx)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_block, blocks))
    else:
        for block in blocks:
            run_block(block)
    return out


def estimate_value(spec: GameSpec, pair: StrategyPair, t0: float, x0: float,
                   n_paths: int, seed: int, *, n_steps: int = 400,
                   antithetic: bool = False, threads: int = 1) -> Tuple[float, float]:
    """Monte Carlo mean and standard error of the payoff for one pair."""
    samples = _payoff_samples(spec, pair, t0, x0, n_paths, seed, n_steps,
                              antithetic, threads)
    return float(np.mean(samples)), float(np.std(samples) / math.sqrt(n_paths))


@dataclass
class StrategyResult:
    name: str
    kind: str          # "equilibrium" | "stopper_deviation" | "controller_deviation"
    mean: float
    se: float
    diff_vs_eq: float
    se_diff: float
    margin: float
    direction: str     # inequality asserted, e.g. "J(dev) <= J(eq) + margin"
    passed: bool

    def to_dict(self):
        return {k: getattr(self, k) for k in
                ("name", "kind", "mean", "se", "diff_vs_eq", "se_diff",
                 "margin", "direction", "passed")}


@dataclass
class SaddleReport:
    t0: float
    x0: float
    n_paths: int
    n_steps: int
    seed: int
    v_reference: float
    eq_mean: float
    eq_se: float
    allowance: float
    value_gap: float
    value_margin: float
    value_matched: bool
    rows: List[StrategyResult] = field(default_factory=list)
    note: str = ("saddle inequalities verified against the configured finite "
                 "deviation menu only")

    @property
    def all_passed(self) -> bool:
        return self.value_matched and all(r.passed for r in self.rows)

    def strict_margins(self) -> dict:
        best = {"stopper_deviation": 0.0, "controller_deviation": 0.0}
        for r in self.rows:
            if r.se_diff <= 0:
                continue
            gap = -r.diff_vs_eq if r.kind == "stopper_deviation" else r.diff_vs_eq
            best[r.kind] = max(best[r.kind], gap / r.se_diff)
        return best

    def to_dict(self):
        return {
            "t0": self.t0, "x0": self.x0, "n_paths": self.n_paths,
            "n_steps": self.n_steps, "seed": self.seed,
            "v_reference": self.v_reference, "eq_mean": self.eq_mean,
            "eq_se": self.eq_se, "allowance": self.allowance,
            "value_gap": self.value_gap, "value_margin": self.value_margin,
            "value_matched": self.value_matched,
            "all_passed": self.all_passed, "note": self.note,
            "strict_margins": self.strict_margins(),
            "rows": [r.to_dict() for r in self.rows],
        }

    def to_text(self) -> str:
        lines = [self.note,
                 f"(t0, x0) = ({self.t0:g}, {self.x0:g}); "
                 f"{self.n_paths} paths x {self.n_steps} steps; seed {self.seed}",
                 f"PDE value v(t0,x0) = {self.v_reference:.6f}",
                 f"equilibrium J = {self.eq_mean:.6f} +- {self.eq_se:.6f} "
                 f"(gap {self.value_gap:.2e}, margin {self.value_margin:.2e}) "
                 f"{'OK' if self.value_matched else 'FAIL'}",
                 f"{'name':32s} {'J':>12s} {'se':>9s} {'J-Jeq':>12s} {'margin':>10s} verdict"]
        for r in self.rows:
            lines.append(f"{r.name:32s} {r.mean:12.6f} {r.se:9.6f} "
                         f"{r.diff_vs_eq:12.6f} {r.margin:10.6f} "
                         f"{'pass' if r.passed else 'FAIL'}")
        return "\n".join(lines)


def deviation_suite(spec: GameSpec, surface: ValueSurface, pair_curves: BoundaryPair,
                    t0: float, x0: float, n_paths: int, seed: int = 0, *,
                    n_steps: int = 400, allowance_c: float = 1.0,
                    stop_shifts: Sequence[float] = (),
                    ctrl_shifts: Sequence[float] = (),
                    fixed_fracs: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
                    reflect_const: Optional[float] = None,
                    threads: int = 1) -> SaddleReport:
    """Estimate the equilibrium payoff and every menu deviation under common
    random numbers; margins are 3 paired standard errors plus
    allowance_c * (sqrt(dt) + dx)."""
    grid = surface.grid
    t_nodes, a_vals, b_vals = pair_curves.t_nodes, pair_curves.a, pair_curves.b
    b0 = float(step_values(t_nodes, b_vals, np.asarray([t0]))[0])
    a0 = float(step_values(t_nodes, a_vals, np.asarray([t0]))[0])
    if not b0 > grid.domain.infimum:
        raise PreconditionFailure(
            f"b(t0) = {b0} is not above the domain infimum; "
            "the reflected control cannot be built")
    if not math.isfinite(a0):
        a0 = grid.x_min

    width = (b0 - a0) if math.isfinite(b0) else (grid.x_max - a0)
    if not stop_shifts:
        stop_shifts = (-0.1 * width, 0.1 * width)
    if not ctrl_shifts:
        ctrl_shifts = (-0.1 * width, 0.1 * width)
    if reflect_const is None:
        reflect_const = a0 + 0.75 * width

    for s in ctrl_shifts:
        shifted = b_vals[np.isfinite(b_vals)] + s
        if np.any(shifted < grid.x_min):
            raise ConfigError("shifted control boundary leaves the grid window")
    for s in stop_shifts:
        shifted = a_vals[np.isfinite(a_vals)] + s
        if np.any(shifted < grid.x_min - 1e-12):
            raise ConfigError("shifted stopping boundary leaves the grid window")

    dt = (spec.T - t0) / n_steps
    allowance = allowance_c * (math.sqrt(dt) + grid.dx)
    v_ref = interp_surface(surface, "v", t0, x0)

    eq_pair = StrategyPair(StopRule.hit_boundary(t_nodes, a_vals),
                           ControlRule.reflect(t_nodes, b_vals), "equilibrium")
    eq = _payoff_samples(spec, eq_pair, t0, x0, n_paths, seed, n_steps, threads=threads)
    eq_mean = float(np.mean(eq))
    eq_se = float(np.std(eq) / math.sqrt(n_paths))
    value_gap = abs(eq_mean - v_ref)
    value_margin = 3 * eq_se + allowance

    menu: List[StrategyPair] = []
    horizon = spec.T - t0
    for frac in fixed_fracs:
        menu.append(StrategyPair(StopRule.fixed_time(frac * horizon),
                                 ControlRule.reflect(t_nodes, b_vals),
                                 f"stop: fixed time {frac * horizon:g}"))
    for s in stop_shifts:
        menu.append(StrategyPair(StopRule.threshold_shift(t_nodes, a_vals, s),
                                 ControlRule.reflect(t_nodes, b_vals),
                                 f"stop: threshold shift {s:+g}"))
    menu.append(StrategyPair(StopRule.hit_boundary(t_nodes, a_vals),
                             ControlRule.none(), "control: none"))
    for s in ctrl_shifts:
        menu.append(StrategyPair(StopRule.hit_boundary(t_nodes, a_vals),
                                 ControlRule.reflect_shifted(t_nodes, b_vals, s),
                                 f"control: reflect shifted {s:+g}"))
    menu.append(StrategyPair(StopRule.hit_boundary(t_nodes, a_vals),
                             ControlRule.reflect_constant(reflect_const),
                             f"control: reflect at {reflect_const:g}"))

    rows: List[StrategyResult] = []
    for pair in menu:
        dev = _payoff_samples(spec, pair, t0, x0, n_paths, seed, n_steps, threads=threads)
        diff = dev - eq
        d_mean = float(np.mean(diff))
        d_se = float(np.std(diff) / math.sqrt(n_paths))
        margin = 3 * d_se + allowance
        stopper = pair.control.kind == "reflect" and pair.stop.kind != "hit_boundary"
        kind = "stopper_deviation" if stopper else "controller_deviation"
        if stopper:
            passed = d_mean <= margin
            direction = "J(dev) <= J(eq) + margin"
        else:
            passed = d_mean >= -margin
            direction = "J(dev) >= J(eq) - margin"
        rows.append(StrategyResult(pair.name, kind, float(np.mean(dev)),
                                   float(np.std(dev) / math.sqrt(n_paths)),
                                   d_mean, d_se, margin, direction, passed))

    return SaddleReport(t0, x0, n_paths, n_steps, seed, v_ref, eq_mean, eq_se,
                        allowance, value_gap, value_margin,
                        value_gap <= value_margin, rows)


def calibrate_allowance(spec: GameSpec, grid_cfgs: Sequence[GridConfig],
                        n_steps_list: Sequence[int], t0: float, x0: float,
                        n_paths: int, seed: int = 0) -> dict:
    """Regress |J_hat - v| on sqrt(dt) + dx over several resolutions; the
    through-origin slope is the discretization-allowance constant."""
    from .boundaries import extract_pair
    from .grid import build_grid
    from .vi_solver import solve_projected

    gaps, zs = [], []
    for cfg, n_steps in zip(grid_cfgs, n_steps_list):
        grid = build_grid(spec, cfg)
        surface = solve_projected(spec, grid)
        pair = extract_pair(surface, spec)
        eq_pair = StrategyPair(StopRule.hit_boundary(pair.t_nodes, pair.a),
                               ControlRule.reflect(pair.t_nodes, pair.b))
        mean, _ = estimate_value(spec, eq_pair, t0, x0, n_paths, seed,
                                 n_steps=n_steps)
        v_ref = interp_surface(surface, "v", t0, x0)
        gaps.append(abs(mean - v_ref))
        zs.append(math.sqrt((spec.T - t0) / n_steps) + grid.dx)
    gaps_arr, z_arr = np.asarray(gaps), np.asarray(zs)
    c = float(np.sum(gaps_arr * z_arr) / np.sum(z_arr**2))
    return {"c": c, "gaps": gaps, "z": zs}
