"""Independent pure-optimal-stopping oracle (projected SOR).

Solves, without any gradient constraint, the obstacle problem

    max{ dv/dt + (sigma^2/2) v_xx + mu v_x - r v + h, g - v } = 0,
    v(T, .) = g(T),

one implicit backward step at a time, each step's linear complementarity
problem iterated with projected successive over-relaxation.  Used as the
cross-check for instances where the control cost is so large that the
controller never acts.  Kept independent of vi_solver: different iteration,
no shared stepping code.
"""

from __future__ import annotations

import numpy as np

from .errors import FixedPointStall
from .grid import Grid
from .model import GameSpec
from .vi_solver import ValueSurface, _derive

__all__ = ["solve_stopping_psor"]


def solve_stopping_psor(spec: GameSpec, grid: Grid, omega: float = 1.5,
                        tol: float = 1e-11, max_sweeps: int = 20000) -> ValueSurface:
    x = grid.x_nodes
    n, dt, dx = grid.n_x, grid.dt, grid.dx
    sig2 = np.asarray(spec.sigma(x), dtype=float) ** 2
    mu = np.asarray(spec.mu(x), dtype=float)

    # A u = rhs with A = I/dt - (L - r) on interior rows
    low = -(sig2 / (2 * dx**2) - mu / (2 * dx))
    diag = 1.0 / dt + sig2 / dx**2 + spec.r
    up = -(sig2 / (2 * dx**2) + mu / (2 * dx))

    v = np.empty((grid.n_t, n))
    v[-1, :] = spec.g(spec.T)
    scale = 1.0 + float(np.max(np.abs(spec.h(0.0, x)))) / max(spec.r, 1.0 / spec.T)

    for k in range(grid.n_t - 2, -1, -1):
        g_k = float(spec.g(grid.t_nodes[k]))
        rhs = v[k + 1] / dt + np.asarray(spec.h(grid.t_nodes[k], x), dtype=float)
        u = np.maximum(v[k + 1].copy(), g_k)
        u[0] = g_k
        for sweep in range(max_sweeps):
            change = 0.0
            # red-black ordering keeps the sweeps vectorized; same fixed
            # point as the lexicographic projected-SOR sweep
            for parity in (1, 0):
                idx = np.arange(1 + parity, n - 1, 2)
                gs = (rhs[idx] - low[idx] * u[idx - 1] - up[idx] * u[idx + 1]) / diag[idx]
                new = np.maximum(g_k, u[idx] + omega * (gs - u[idx]))
                if len(idx):
                    change = max(change, float(np.max(np.abs(new - u[idx]))))
                u[idx] = new
            if grid.right_bc == "gradient":
                edge = u[n - 2] + spec.alpha0 * dx
            else:
                edge = 2 * u[n - 2] - u[n - 3]
            change = max(change, abs(edge - u[n - 1]))
            u[n - 1] = max(edge, g_k)
            if change < tol * scale:
                break
        else:
            raise FixedPointStall(f"PSOR not converged at time index {k}")
        v[k] = u

    vx, vxx = _derive(grid, v)
    return ValueSurface(grid, v, vx, vxx, "psor",
                        {"omega": omega, "tol": tol, "alpha0": spec.alpha0})
