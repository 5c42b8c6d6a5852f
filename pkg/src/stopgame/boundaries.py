"""Extraction of the stopping boundary a(t) and action boundary b(t) from a
value surface, plus verdicts for their structural properties.

Conventions: inf(empty) = +inf, sup(empty) = domain infimum.  Boundary values
at the window edge are flagged rather than trusted; downstream checks treat
flagged rows as unreliable.  Boundaries are reported at grid times only, and
between time nodes users should extend them as left-continuous step functions
(see ``step_values``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import Domain, GameSpec, theta_lower
from .vi_solver import ValueSurface

__all__ = [
    "BoundaryPair", "extract_a", "extract_b", "extract_pair",
    "check_boundary_properties", "BoundaryPropertyReport", "step_values",
    "absorption_staircase", "interp_surface",
]


@dataclass
class BoundaryPair:
    t_nodes: np.ndarray
    a: np.ndarray                 # extended reals; +inf = empty continuation
    b: np.ndarray                 # extended reals; +inf allowed
    a_at_window_edge: np.ndarray  # bool per node
    b_at_window_edge: np.ndarray
    # near the horizon {v > g} collapses, and where v_x flattens the
    # grad_tol threshold cannot locate the action boundary to grid
    # resolution; such rows are flagged unreliable rather than trusted
    a_resolution_limited: np.ndarray = None
    b_resolution_limited: np.ndarray = None


def _default_gap_tol(surface: ValueSurface) -> float:
    # penalized surfaces undershoot the obstacle by O(delta)
    if surface.scheme == "penalized":
        return 10.0 * surface.params["delta"]
    return 1e-9


def extract_a(surface: ValueSurface, gap_tol: Optional[float] = None,
              spec: Optional[GameSpec] = None) -> np.ndarray:
    """Per-time stopping boundary: smallest x with v - g > gap_tol, with one
    linear-interpolation refinement inside the bracketing cell."""
    if gap_tol is None:
        gap_tol = _default_gap_tol(surface)
    grid = surface.grid
    x = grid.x_nodes
    v = surface.v
    if spec is not None:
        g_vals = np.asarray(spec.g(grid.t_nodes), dtype=float)
    else:
        # the solvers impose v(t, left edge) = g(t)
        g_vals = v[:, 0]
    out = np.empty(grid.n_t)
    for k in range(grid.n_t):
        gap = v[k] - g_vals[k]
        qual = gap > gap_tol
        if not qual.any():
            out[k] = math.inf
            continue
        i = int(np.argmax(qual))
        if i == 0:
            out[k] = grid.domain.infimum
            continue
        d0, d1 = gap[i - 1], gap[i]
        frac = (gap_tol - d0) / (d1 - d0) if d1 > d0 else 1.0
        out[k] = float(np.clip(x[i - 1] + frac * grid.dx, x[i - 1], x[i]))
    return out


def _extract_b_flagged(surface: ValueSurface, grad_tol: float, alpha0: float):
    grid = surface.grid
    x = grid.x_nodes
    level = alpha0 - grad_tol
    out = np.empty(grid.n_t)
    edge = np.zeros(grid.n_t, dtype=bool)
    limited = np.zeros(grid.n_t, dtype=bool)
    out[-1] = math.inf  # the whole state space is inaction at the horizon
    for k in range(grid.n_t - 1):
        vx = surface.vx[k]
        qual = vx < level
        if not qual.any():
            out[k] = grid.domain.infimum
            edge[k] = True
            continue
        i = int(np.nonzero(qual)[0][-1])
        if i >= grid.n_x - 2:
            out[k] = math.inf
            edge[k] = True
            continue
        d0, d1 = vx[i], vx[i + 1]
        frac = (level - d0) / (d1 - d0) if d1 > d0 else 0.0
        out[k] = float(np.clip(x[i] + frac * grid.dx, x[i], x[i + 1]))
        # conditioning: a grad_tol-sized wiggle of v_x moves the crossing by
        # grad_tol / slope; flag rows where that exceeds 2 cells
        slope = (d1 - d0) / grid.dx
        limited[k] = slope <= 0 or grad_tol / slope > 2 * grid.dx
    return out, edge, limited


def extract_b(surface: ValueSurface, grad_tol: Optional[float] = None,
              alpha0: Optional[float] = None) -> np.ndarray:
    """Per-time action boundary: largest x with v_x < alpha0 - grad_tol, one
    interpolation refinement; +inf when the slack persists at the last
    interior node, and +inf on the terminal row."""
    if alpha0 is None:
        alpha0 = _infer_alpha0(surface)
    if grad_tol is None:
        grad_tol = 1e-3 * alpha0
    return _extract_b_flagged(surface, grad_tol, alpha0)[0]


def _infer_alpha0(surface: ValueSurface) -> float:
    alpha0 = surface.params.get("alpha0")
    if alpha0 is None:
        raise ValueError("alpha0 not recorded on surface; pass it explicitly")
    return alpha0


def extract_pair(surface: ValueSurface, spec: GameSpec,
                 gap_tol: Optional[float] = None,
                 grad_tol: Optional[float] = None) -> BoundaryPair:
    grid = surface.grid
    if gap_tol is None:
        gap_tol = _default_gap_tol(surface)
    a = extract_a(surface, gap_tol, spec=spec)
    a_edge = a == grid.domain.infimum
    if grad_tol is None:
        grad_tol = 1e-3 * spec.alpha0
    b, b_edge, b_limited = _extract_b_flagged(surface, grad_tol, spec.alpha0)

    # reliability: the threshold-crossing bias is ~ gap_tol / slope; flag
    # rows where that exceeds the extraction's own cell resolution
    limited = np.zeros(grid.n_t, dtype=bool)
    g_nodes = np.asarray(spec.g(grid.t_nodes), dtype=float)
    for k in range(grid.n_t):
        if not (np.isfinite(a[k]) and a[k] > grid.x_min):
            continue
        gap = surface.v[k] - g_nodes[k]
        i = int(np.searchsorted(grid.x_nodes, a[k], side="right"))
        i = min(max(i, 1), grid.n_x - 1)
        slope = (gap[i] - gap[i - 1]) / grid.dx
        limited[k] = slope <= 0 or gap_tol / slope > 2 * grid.dx
    return BoundaryPair(grid.t_nodes.copy(), a, b, a_edge, b_edge, limited, b_limited)


def step_values(t_nodes: np.ndarray, values: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Left-continuous step extension: value at the next grid time >= s."""
    idx = np.searchsorted(t_nodes, np.asarray(query, dtype=float) - 1e-12, side="left")
    idx = np.clip(idx, 0, len(t_nodes) - 1)
    return np.asarray(values, dtype=float)[idx]


def absorption_staircase(values: np.ndarray) -> np.ndarray:
    """Normalize a stopping/absorption curve for step extension.

    The trailing +inf run is the empty-continuation convention at the
    horizon; extending it backwards over the last time interval would absorb
    every path one step early.  Replace it by the last finite level (the
    exact boundary is finite up to T).  All-infinite curves (degenerate
    instances where stopping is immediate) are returned unchanged.
    """
    vals = np.asarray(values, dtype=float).copy()
    finite = np.nonzero(np.isfinite(vals))[0]
    if len(finite):
        last = int(finite[-1])
        vals[last + 1:] = vals[last]
    return vals


def interp_surface(surface: ValueSurface, field_name: str, t: float, x: float) -> float:
    """Bilinear interpolation of v / vx on the surface."""
    arr = getattr(surface, field_name)
    grid = surface.grid
    k = int(np.clip(np.searchsorted(grid.t_nodes, t) - 1, 0, grid.n_t - 2))
    wt = (t - grid.t_nodes[k]) / grid.dt
    wt = float(np.clip(wt, 0.0, 1.0))
    row = arr[k] * (1 - wt) + arr[k + 1] * wt
    return float(np.interp(x, grid.x_nodes, row))


@dataclass
class PropertyVerdict:
    name: str
    passed: bool
    detail: str = ""
    first_offending_index: Optional[int] = None


@dataclass
class BoundaryPropertyReport:
    verdicts: List[PropertyVerdict]
    degenerate: bool = False
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, name: str) -> PropertyVerdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def summary(self) -> str:
        lines = [f"{'PASS' if v.passed else 'FAIL'} {v.name}"
                 + (f"  [{v.detail}]" if v.detail else "") for v in self.verdicts]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines)


def _monotone_verdict(name, values, reliable, tol=1e-9):
    """Non-decreasing check on the raw sequence, skipping unreliable rows.

    finite -> +inf is fine; +inf -> finite on reliable rows is a violation.
    """
    vals = np.asarray(values, dtype=float)
    prev_idx = None
    for k in range(len(vals)):
        if not reliable[k]:
            continue
        if prev_idx is not None:
            v0, v1 = vals[prev_idx], vals[k]
            if math.isinf(v0) and v0 > 0 and math.isfinite(v1):
                return PropertyVerdict(name, False,
                                       f"drops from +inf at index {k}", k)
            if math.isfinite(v0) and math.isfinite(v1) and v1 < v0 - tol:
                return PropertyVerdict(name, False,
                                       f"decreases by {v0 - v1:.3e} at index {k}", k)
        prev_idx = k
    return PropertyVerdict(name, True)


def check_boundary_properties(pair: BoundaryPair, spec: GameSpec,
                              surface: ValueSurface,
                              fit_tol: Optional[float] = None,
                              jump_tol: Optional[float] = None) -> BoundaryPropertyReport:
    """Verdicts for monotonicity, the theta_lower bound, positivity on the
    half line, ordering a < b, smooth fit, and bounded-jump continuity
    heuristics (the latter gated on the hypotheses under which continuity is
    known: h_x > 0 at a, and h_xx > 0 or mu_xx > 0 at b)."""
    grid = surface.grid
    dx = grid.dx
    if fit_tol is None:
        fit_tol = 0.05 * spec.alpha0
    if jump_tol is None:
        jump_tol = max(10 * dx, 0.02 * (grid.x_max - grid.x_min))

    verdicts: List[PropertyVerdict] = []
    notes: List[str] = []
    t = pair.t_nodes
    a, b = pair.a, pair.b
    a_ok = ~pair.a_at_window_edge
    if pair.a_resolution_limited is not None and pair.a_resolution_limited.any():
        a_ok = a_ok & ~pair.a_resolution_limited
        notes.append(f"{int(pair.a_resolution_limited.sum())} near-horizon rows are "
                     "resolution-limited for the stopping boundary and skipped")
    b_ok = ~pair.b_at_window_edge
    if pair.b_resolution_limited is not None and pair.b_resolution_limited.any():
        b_ok = b_ok & ~pair.b_resolution_limited
        notes.append(f"{int(pair.b_resolution_limited.sum())} rows with a flat "
                     "gradient approach are resolution-limited for the action "
                     "boundary and skipped")
    finite_a = np.isfinite(a) & a_ok
    degenerate = not finite_a[:-1].any()
    if degenerate:
        notes.append("degenerate instance: no finite stopping boundary "
                     "(continuation region empty); most checks are vacuous")

    verdicts.append(_monotone_verdict("a_nondecreasing", a, a_ok))
    verdicts.append(_monotone_verdict("b_nondecreasing", b, b_ok))

    # a(t) <= theta_lower(t) + 2 dx
    bad_idx = None
    for k in range(grid.n_t - 1):
        if not finite_a[k]:
            continue
        trig = theta_lower(spec, t[k], (grid.x_min, grid.x_max * 16 + 1.0))
        if math.isfinite(trig) and a[k] > trig + 2 * dx:
            bad_idx = k
            detail = f"a({t[k]:.4g}) = {a[k]:.6g} > theta_lower + 2dx = {trig + 2 * dx:.6g}"
            break
    verdicts.append(PropertyVerdict("a_le_theta_lower", bad_idx is None,
                                    detail if bad_idx is not None else "",
                                    bad_idx))

    if spec.domain is Domain.HALF_LINE:
        mask = finite_a & (t > 0)
        bad = mask & (a <= 0)
        k = int(np.argmax(bad)) if bad.any() else None
        verdicts.append(PropertyVerdict("a_positive_for_t_positive", not bad.any(),
                                        f"a({t[k]:.4g}) <= 0" if k is not None else "",
                                        k))

    # a < b where both finite and a above the domain infimum
    both = finite_a & np.isfinite(b) & b_ok & (a > grid.domain.infimum)
    bad = both & (a >= b)
    k = int(np.argmax(bad)) if bad.any() else None
    verdicts.append(PropertyVerdict("a_below_b", not bad.any(),
                                    f"a >= b at index {k}" if k is not None else "", k))

    # b > inf O, gated on the sufficient condition
    #     h_x(t, y) - alpha0 (r - mu_x(y)) <= 0  for y near inf O
    probe_y = grid.x_min + 1e-6 * (grid.x_max - grid.x_min) \
        if spec.domain is Domain.HALF_LINE else grid.x_min
    hypo = float(spec.h_x(0.0, probe_y)
                 - spec.alpha0 * (spec.r - spec.mu_x(probe_y))) <= 0.0
    if hypo and not degenerate:
        bad = (~np.isfinite(b) & (b < 0)) | (np.isfinite(b) & (b <= grid.domain.infimum))
        bad &= b_ok
        k = int(np.argmax(bad)) if bad.any() else None
        verdicts.append(PropertyVerdict("b_above_infimum", not bad.any(),
                                        f"b at domain infimum at index {k}" if k is not None else "",
                                        k))
    else:
        verdicts.append(PropertyVerdict("b_above_infimum", True,
                                        "hypothesis not satisfied; check skipped"
                                        if not degenerate else "degenerate; skipped"))

    # smooth fit |v_x(t, a(t))| <= fit_tol
    worst = 0.0
    bad_idx = None
    for k in range(grid.n_t - 1):
        if not finite_a[k] or a[k] <= grid.x_min or a[k] >= grid.x_max:
            continue
        val = abs(interp_surface(surface, "vx", t[k], float(a[k])))
        if val > worst:
            worst = val
            if val > fit_tol:
                bad_idx = k
    verdicts.append(PropertyVerdict("smooth_fit", worst <= fit_tol,
                                    f"max |v_x(t, a(t))| = {worst:.4g} vs tol {fit_tol:.4g}",
                                    bad_idx))

    # bounded-jump continuity heuristics, hypothesis-gated per node
    def jump_check(name, vals, reliable, hypo_at):
        worst_jump, bad_k = 0.0, None
        prev = None
        for k in range(len(vals)):
            if not (reliable[k] and np.isfinite(vals[k])):
                prev = None
                continue
            if prev is not None and hypo_at(k):
                jump = abs(vals[k] - vals[prev])
                if jump > worst_jump:
                    worst_jump = jump
                    if jump > jump_tol:
                        bad_k = k
            prev = k
        return PropertyVerdict(name, bad_k is None,
                               f"max gated jump {worst_jump:.4g} vs tol {jump_tol:.4g}",
                               bad_k)

    def a_hypo(k):
        return float(spec.h_x(t[k], max(float(a[k]), grid.x_min))) > 0

    def b_hypo(k):
        y = float(np.clip(b[k], grid.x_min + dx, grid.x_max - dx))
        h_xx = float(spec.h_x(t[k], y + dx) - spec.h_x(t[k], y - dx)) / (2 * dx)
        mu_xx = float(spec.mu_x(y + dx) - spec.mu_x(y - dx)) / (2 * dx)
        return h_xx > 1e-12 or mu_xx > 1e-12

    verdicts.append(jump_check("a_jump_bounded", a, finite_a, a_hypo))
    # the action boundary accelerates without bound while it exits the
    # truncation window; inside the top band its row-to-row motion is
    # truncation-dominated, so the discontinuity heuristic stops there
    edge_band = grid.x_max - 0.2 * (grid.x_max - grid.x_min)
    b_jump_ok = np.isfinite(b) & b_ok & (b <= edge_band)
    verdicts.append(jump_check("b_jump_bounded", b, b_jump_ok, b_hypo))

    return BoundaryPropertyReport(verdicts, degenerate, notes)
