"""Auxiliary absorbed optimal-stopping problem whose value must coincide with
the spatial derivative of the game value.

The solver assembles the variational inequality

    min{ dw/dt + G w + h_x, alpha0 - w } = 0   on {x > a(t)},

with G = (sigma^2/2) d_xx + (sigma sigma_x + mu) d_x - (r - mu_x), absorption
w = 0 along the curve a(t) (Dirichlet imposed at the interpolated boundary
location between columns), w(T, .) = 0, and the cap w <= alpha0 enforced by
projection each backward step.  The VI form is assembled from the
distributional inequality satisfied by the derivative of the value plus the
gradient cap; it is not written out explicitly in closed form anywhere else,
so this module is the one place that fixes it.

The key structural point this module exists to check: the correct boundary
condition at a(t) is *absorption* (w = 0), inherited from smooth fit of the
game value, not a reflecting/Neumann condition; ``absorption=False`` swaps in
the Neumann row so tests can confirm that reflection is strictly worse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import solve_banded

from .errors import GridMismatch
from .grid import Grid
from .model import GameSpec
from .vi_solver import ValueSurface

__all__ = ["AuxSurface", "lambda_fn", "solve_aux", "compare_vx",
           "sigma_star_curve", "DiscrepancySummary", "aux_mc_value"]


def lambda_fn(spec: GameSpec, y):
    """Effective discount r - mu_x(y); may be negative (growth credit)."""
    return spec.r - spec.mu_x(y)


@dataclass
class AuxSurface:
    grid: Grid
    w: np.ndarray
    absorbed_mask: np.ndarray   # True where x <= a(t)
    a_values: np.ndarray
    params: dict = field(default_factory=dict)


def solve_aux(spec: GameSpec, grid: Grid, a_values: np.ndarray,
              *, absorption: bool = True) -> AuxSurface:
    """Backward implicit solve of the capped absorbed problem.

    ``a_values`` are the absorption levels at the grid times (``+inf`` rows
    are fully absorbed, w = 0 there).  The first active node next to the
    curve uses a shortened-cell stencil so the Dirichlet (or Neumann) datum
    sits at the interpolated boundary location.
    """
    x = grid.x_nodes
    n, dt, dx = grid.n_x, grid.dt, grid.dx
    alpha0 = spec.alpha0
    sig = np.asarray(spec.sigma(x), dtype=float)
    sig2 = sig**2
    drift = sig * np.asarray(spec.sigma_x(x), dtype=float) + np.asarray(spec.mu(x), dtype=float)
    lam = np.asarray(lambda_fn(spec, x), dtype=float)

    lower = sig2 / (2 * dx**2) - drift / (2 * dx)
    diag = -sig2 / dx**2 - lam
    upper = sig2 / (2 * dx**2) + drift / (2 * dx)

    w = np.zeros((grid.n_t, n))
    a_arr = np.asarray(a_values, dtype=float)
    if len(a_arr) != grid.n_t:
        raise GridMismatch("a_values length does not match the time grid")
    absorbed = x[None, :] <= a_arr[:, None]

    for k in range(grid.n_t - 2, -1, -1):
        a_k = a_arr[k]
        active0 = int(np.searchsorted(x, a_k, side="right")) if math.isfinite(a_k) \
            else (0 if a_k < 0 else n)
        if active0 >= n - 2:
            absorbed[k, :] = True   # no usable continuation strip in the window
            continue
        h_x_k = np.asarray(spec.h_x(grid.t_nodes[k], x), dtype=float)
        m = n - active0

        ab = np.zeros((4, m))
        rhs = np.empty(m)
        # interior rows (local indices 1..m-2 map to global active0+1..n-2)
        gi = slice(active0 + 1, n - 1)
        ab[0, 2:] = -upper[gi]
        ab[1, 1:-1] = 1.0 / dt - diag[gi]
        ab[2, :-2] = -lower[gi]
        rhs[1:-1] = w[k + 1, gi] / dt + h_x_k[gi]

        # first active row: shortened cell against the curve
        i0 = active0
        d = x[i0] - a_k if (math.isfinite(a_k) and a_k > x[0]) else dx
        d = float(np.clip(d, 1e-8 * dx, dx))
        hm, hp = d, dx
        cxx = 2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))
        cx = (-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp)))
        cB = 0.5 * sig2[i0] * cxx[0] + drift[i0] * cx[0]
        c0 = 0.5 * sig2[i0] * cxx[1] + drift[i0] * cx[1] - lam[i0]
        cP = 0.5 * sig2[i0] * cxx[2] + drift[i0] * cx[2]
        if not absorption:
            c0 += cB          # Neumann: ghost value equals w at the first node
        # absorption: ghost value is 0, so cB drops out of the row
        ab[1, 0] = 1.0 / dt - c0
        ab[0, 1] = -cP
        rhs[0] = w[k + 1, i0] / dt + h_x_k[i0]

        # lateral condition at x_max, matched to the main solve's truncation:
        # active-gradient v_x = alpha0 pins w = alpha0; the extrapolation row
        # v_xx = 0 makes the discrete v_x flat at the edge, i.e. Neumann for w
        if grid.right_bc == "gradient":
            ab[1, m - 1] = 1.0
            ab[2, m - 2] = 0.0
            ab[3, m - 3] = 0.0
            rhs[m - 1] = alpha0
        else:
            ab[1, m - 1] = 1.0
            ab[2, m - 2] = -1.0
            ab[3, m - 3] = 0.0
            rhs[m - 1] = 0.0

        u = solve_banded((2, 1), ab, rhs)
        u = np.minimum(u, alpha0)          # cap projection
        u = np.maximum(u, 0.0)
        w[k, active0:] = u

    return AuxSurface(grid, w, absorbed, a_arr,
                      {"absorption": absorption, "alpha0": alpha0})


@dataclass
class DiscrepancySummary:
    sup: float
    l1: float
    worst_t: float
    worst_x: float
    n_nodes: int

    def to_dict(self):
        return {"sup": self.sup, "l1": self.l1, "worst_t": self.worst_t,
                "worst_x": self.worst_x, "n_nodes": self.n_nodes}


def compare_vx(aux: AuxSurface, surface: ValueSurface,
               exclusion_cells: int = 2) -> DiscrepancySummary:
    """Sup and mean-absolute discrepancy |w - v_x| on nodes with
    x > a(t) + exclusion_cells * dx, plus the worst node location."""
    if aux.grid.n_t != surface.grid.n_t or aux.grid.n_x != surface.grid.n_x \
            or abs(aux.grid.dx - surface.grid.dx) > 1e-14 \
            or abs(aux.grid.dt - surface.grid.dt) > 1e-14:
        raise GridMismatch("aux and value surfaces use different grids")
    grid = aux.grid
    x = grid.x_nodes
    band = exclusion_cells * grid.dx
    diff = np.abs(aux.w - surface.vx)
    mask = np.zeros_like(diff, dtype=bool)
    for k in range(grid.n_t):
        a_k = aux.a_values[k]
        if math.isinf(a_k) and a_k > 0:
            continue
        lo = a_k + band if math.isfinite(a_k) else -math.inf
        mask[k, 1:-1] = x[1:-1] > lo
    if not mask.any():
        return DiscrepancySummary(0.0, 0.0, math.nan, math.nan, 0)
    vals = np.where(mask, diff, -1.0)
    flat = int(np.argmax(vals))
    k, i = divmod(flat, grid.n_x)
    return DiscrepancySummary(float(np.max(diff[mask])), float(np.mean(diff[mask])),
                              float(grid.t_nodes[k]), float(x[i]),
                              int(mask.sum()))


def aux_mc_value(spec: GameSpec, t0: float, y0: float, t_nodes: np.ndarray,
                 a_values: np.ndarray, n_paths: int, seed: int = 0,
                 n_steps: int = 400,
                 stop_curve: Optional[np.ndarray] = None) -> Tuple[float, float, float]:
    """Monte Carlo oracle for the absorbed stopping payoff along the
    auxiliary diffusion.

    Estimates E[ D_tau alpha0 1{tau < tau_a} + int_0^{tau ^ tau_a} D_s
    h_x(t0+s, Y_s) ds ] with D the running discount exp(-int (r - mu_x(Y)))
    and tau the first time Y rises to ``stop_curve`` (never, when None).
    Discrete ties tau == tau_a resolve to absorption (no alpha0 charge);
    the tie rate is returned alongside (mean, std_error).
    """
    from .boundaries import absorption_staircase, step_values
    from .sde import first_hitting, rng_stream

    dt = (spec.T - t0) / n_steps
    times = t0 + dt * np.arange(n_steps + 1)
    a_sim = step_values(t_nodes, absorption_staircase(a_values), times)
    stop_sim = None if stop_curve is None else step_values(t_nodes, stop_curve, times)

    block = 4096
    total = np.empty(n_paths)
    ties = 0
    for b, start in enumerate(range(0, n_paths, block)):
        bs = min(block, n_paths - start)
        rng = rng_stream(seed, b)
        dW = rng.standard_normal((bs, n_steps)) * math.sqrt(dt)
        ys = np.empty((bs, n_steps + 1))
        disc = np.empty((bs, n_steps + 1))
        state = np.full(bs, float(y0))
        ys[:, 0] = state
        disc[:, 0] = 1.0
        acc = np.zeros(bs)
        for k in range(1, n_steps + 1):
            lam = np.asarray(lambda_fn(spec, state), dtype=float)
            acc = acc + lam * dt
            drift = spec.mu(state) + spec.sigma(state) * spec.sigma_x(state)
            state = state + drift * dt + spec.sigma(state) * dW[:, k - 1]
            if spec.domain.infimum == 0.0:
                state = np.maximum(state, 0.0)
            ys[:, k] = state
            disc[:, k] = np.exp(-acc)

        tau_a = first_hitting(ys, np.broadcast_to(a_sim, ys.shape), "below_or_equal")
        tau_a = np.where(tau_a < 0, n_steps, tau_a)
        if stop_sim is None:
            tau = np.full(bs, n_steps, dtype=np.int64)
        else:
            tau = first_hitting(ys, np.broadcast_to(stop_sim, ys.shape), "at_or_above")
            tau = np.where(tau < 0, n_steps, tau)
        m_idx = np.minimum(tau, tau_a)
        ties += int(np.count_nonzero((tau == tau_a) & (tau < n_steps)))

        integrand = disc * np.asarray(spec.h_x(times, ys), dtype=float)
        seg = 0.5 * (integrand[:, 1:] + integrand[:, :-1]) * dt
        running = np.concatenate([np.zeros((bs, 1)), np.cumsum(seg, axis=1)], axis=1)
        val = np.take_along_axis(running, m_idx[:, None], axis=1)[:, 0]
        charge = (tau < tau_a) & (tau < n_steps)
        val = val + charge * spec.alpha0 * np.take_along_axis(disc, tau[:, None], axis=1)[:, 0]
        total[start:start + bs] = val
    return (float(np.mean(total)), float(np.std(total) / math.sqrt(n_paths)),
            ties / n_paths)


def sigma_star_curve(aux: AuxSurface, grad_tol: Optional[float] = None) -> np.ndarray:
    """Per-time largest x with w < alpha0 - grad_tol: the action boundary
    re-derived from the auxiliary problem."""
    alpha0 = aux.params["alpha0"]
    if grad_tol is None:
        grad_tol = 1e-3 * alpha0
    grid = aux.grid
    x = grid.x_nodes
    level = alpha0 - grad_tol
    out = np.empty(grid.n_t)
    for k in range(grid.n_t):
        qual = aux.w[k] < level
        if not qual.any():
            out[k] = grid.domain.infimum
            continue
        i = int(np.nonzero(qual)[0][-1])
        if i >= grid.n_x - 2:
            out[k] = math.inf
            continue
        d0, d1 = aux.w[k, i], aux.w[k, i + 1]
        frac = (level - d0) / (d1 - d0) if d1 > d0 else 0.0
        out[k] = float(np.clip(x[i] + frac * grid.dx, x[i], x[i + 1]))
    return out
