"""Backward-in-time solvers for the value surface.

Two independent routes to the same object:

* ``solve_penalized`` -- fully implicit Euler steps of the semilinear PDE

      dv/dt + (sigma^2/2) v_xx + mu v_x - r v
          = -h - (1/delta) (g - v)^+ + psi_eps(|v_x|^2 - alpha0^2),

  each step solved by damped semismooth Newton on the discretized system.

* ``solve_projected`` -- implicit linear diffusion step followed by an
  obstacle projection v := max(v, g) and a gradient-constraint sweep
  v[i] := min(v[i], v[i-1] + alpha0 dx), iterated to a joint fixed point.

Both enforce v(T, .) = g(T), a Dirichlet left edge v = g(t) and the grid's
right-edge condition.  ``residual_check`` evaluates the two variational
inequality expressions max{min{...}, g - v} and min{max{...}, alpha0 - |v_x|}
on the discrete surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError, FixedPointStall, NewtonDivergence
from .grid import Grid
from .model import GameSpec

__all__ = [
    "PenalizationParams", "ValueSurface", "psi_eps",
    "solve_penalized", "solve_projected", "residual_check", "ResidualReport",
]


def psi_eps(y, eps: float):
    """C^2 convex non-decreasing penalty bridge and its derivative.

    Zero for y <= 0, (y - eps)/eps for y >= 2 eps; on (0, 2 eps) the Hermite
    bridge 2 s^3 - s^4 with s = y/(2 eps), which matches value, first and
    second derivatives at both ends.
    """
    if not 0 < eps < 1:
        raise ConfigError("eps must lie in (0, 1)")
    ya = np.asarray(y, dtype=float)
    s = np.clip(ya / (2 * eps), 0.0, 1.0)
    bridge = s * s * (2 * s - s * s)
    bridge_d = s * s * (3 - 2 * s) / eps
    val = np.where(ya <= 0, 0.0, np.where(ya >= 2 * eps, (ya - eps) / eps, bridge))
    der = np.where(ya <= 0, 0.0, np.where(ya >= 2 * eps, 1.0 / eps, bridge_d))
    if np.ndim(y) == 0:
        return float(val), float(der)
    return val, der


@dataclass(frozen=True)
class PenalizationParams:
    eps: float = 1e-3
    delta: float = 1e-3
    newton_tol: float = 1e-9
    newton_max_iters: int = 80

    def __post_init__(self):
        if not (0 < self.eps < 1 and 0 < self.delta < 1):
            raise ConfigError("eps and delta must lie strictly in (0, 1)")


@dataclass
class ValueSurface:
    """Grid-sampled value with derived derivative arrays.

    ``v``, ``vx``, ``vxx`` are (n_t, n_x); vx is central in the interior and
    one-sided at the edges.  Immutable by convention once returned.
    """

    grid: Grid
    v: np.ndarray
    vx: np.ndarray
    vxx: np.ndarray
    scheme: str                       # "penalized" | "projected"
    params: dict = field(default_factory=dict)

    @property
    def eps(self) -> Optional[float]:
        return self.params.get("eps")

    @property
    def delta(self) -> Optional[float]:
        return self.params.get("delta")


def _derive(grid: Grid, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    dx = grid.dx
    vx = np.empty_like(v)
    vx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * dx)
    vx[:, 0] = (v[:, 1] - v[:, 0]) / dx
    vx[:, -1] = (v[:, -1] - v[:, -2]) / dx
    vxx = np.empty_like(v)
    vxx[:, 1:-1] = (v[:, 2:] - 2 * v[:, 1:-1] + v[:, :-2]) / dx**2
    vxx[:, 0] = vxx[:, 1]
    vxx[:, -1] = vxx[:, -2]
    return vx, vxx


class _Stencil:
    """Time-independent pieces of the spatial operator on a grid."""

    def __init__(self, spec: GameSpec, grid: Grid):
        x = grid.x_nodes
        dx = grid.dx
        sig2 = np.asarray(spec.sigma(x), dtype=float) ** 2
        mu = np.asarray(spec.mu(x), dtype=float)
        self.lower = sig2 / (2 * dx**2) - mu / (2 * dx)   # coeff of u[i-1]
        self.diag = -sig2 / dx**2 - spec.r                # coeff of u[i]
        self.upper = sig2 / (2 * dx**2) + mu / (2 * dx)   # coeff of u[i+1]
        self.dx = dx
        self.n = grid.n_x
        self.right_bc = grid.right_bc

    def apply(self, u: np.ndarray) -> np.ndarray:
        """(L - r) u on interior nodes (returns full-length array, edges 0)."""
        out = np.zeros_like(u)
        out[1:-1] = (self.lower[1:-1] * u[:-2] + self.diag[1:-1] * u[1:-1]
                     + self.upper[1:-1] * u[2:])
        return out


def _edge_rows(banded: np.ndarray, stencil: _Stencil):
    """Write left Dirichlet and right-edge rows into a (2,1)-banded matrix.

    Row 0 is 'u[0] = value', encoded as coefficient 1 on the diagonal.
    Right edge: gradient row u[n-1] - u[n-2] = alpha0*dx, or extrapolation
    row u[n-1] - 2 u[n-2] + u[n-3] = 0.
    """
    n = stencil.n
    banded[1, 0] = 1.0
    banded[0, 1] = 0.0
    if stencil.right_bc == "gradient":
        banded[1, n - 1] = 1.0
        banded[2, n - 2] = -1.0
        banded[3, n - 3] = 0.0
    else:
        banded[1, n - 1] = 1.0
        banded[2, n - 2] = -2.0
        banded[3, n - 3] = 1.0


def _edge_rhs(stencil: _Stencil, g_t: float, alpha0: float) -> Tuple[float, float]:
    if stencil.right_bc == "gradient":
        return g_t, alpha0 * stencil.dx
    return g_t, 0.0


def solve_penalized(spec: GameSpec, grid: Grid,
                    params: PenalizationParams = PenalizationParams()) -> ValueSurface:
    """Penalty-scheme value surface (backward implicit Euler, damped Newton).

    Raises NewtonDivergence with the offending time index when a step's
    residual cannot be reduced to tolerance.
    """
    st = _Stencil(spec, grid)
    n, dt, dx = grid.n_x, grid.dt, grid.dx
    alpha0, delta, eps = spec.alpha0, params.delta, params.eps
    t_nodes = grid.t_nodes
    v = np.empty((grid.n_t, n))
    v[-1, :] = spec.g(spec.T)

    interior = slice(1, n - 1)
    scale = 1.0 + float(np.max(np.abs(spec.h(t_nodes[0], grid.x_nodes)))) + alpha0
    tol = params.newton_tol * scale

    def residual(u, w, h_k, g_k):
        vxc = (u[2:] - u[:-2]) / (2 * dx)
        pen, _ = psi_eps(vxc**2 - alpha0**2, eps)
        F = np.empty(n)
        F[interior] = ((w[interior] - u[interior]) / dt + st.apply(u)[interior]
                       + h_k[interior] + np.maximum(g_k - u[interior], 0.0) / delta
                       - pen)
        F[0] = g_k - u[0]
        if st.right_bc == "gradient":
            F[n - 1] = alpha0 * dx - (u[n - 1] - u[n - 2])
        else:
            F[n - 1] = -(u[n - 1] - 2 * u[n - 2] + u[n - 3])
        return F

    def jacobian(u, g_k):
        # banded (l=2, u=1) storage for scipy.linalg.solve_banded
        vxc = (u[2:] - u[:-2]) / (2 * dx)
        _, pen_d = psi_eps(vxc**2 - alpha0**2, eps)
        ab = np.zeros((4, n))
        ab[0, 2:] = st.upper[1:-1] - pen_d * vxc / dx          # A[i, i+1]
        ab[1, interior] = (-1.0 / dt + st.diag[1:-1]
                           - (g_k > u[interior]) / delta)      # A[i, i]
        ab[2, :-2] = st.lower[1:-1] + pen_d * vxc / dx         # A[i, i-1]
        # edge rows overwrite: A[0,0] = -1 (dF0/du0), right edge similarly
        ab[1, 0] = -1.0
        ab[0, 1] = 0.0
        if st.right_bc == "gradient":
            ab[1, n - 1] = -1.0
            ab[2, n - 2] = 1.0
            ab[3, n - 3] = 0.0
        else:
            ab[1, n - 1] = -1.0
            ab[2, n - 2] = 2.0
            ab[3, n - 3] = -1.0
        return ab

    for k in range(grid.n_t - 2, -1, -1):
        w = v[k + 1]
        t_k = t_nodes[k]
        h_k = np.asarray(spec.h(t_k, grid.x_nodes), dtype=float)
        g_k = float(spec.g(t_k))
        u = w.copy()
        F = residual(u, w, h_k, g_k)
        norm = float(np.max(np.abs(F)))
        converged = norm < tol
        for _ in range(params.newton_max_iters):
            if converged:
                break
            ab = jacobian(u, g_k)
            du = solve_banded((2, 1), ab, -F)
            s, accepted = 1.0, False
            while s >= 2.0**-30:
                u_try = u + s * du
                F_try = residual(u_try, w, h_k, g_k)
                norm_try = float(np.max(np.abs(F_try)))
                if norm_try <= (1 - 1e-4 * s) * norm or norm_try < tol:
                    u, F, norm, accepted = u_try, F_try, norm_try, True
                    break
                s *= 0.5
            if not accepted:
                raise NewtonDivergence(k, norm, params.newton_max_iters)
            converged = norm < tol
        if not converged:
            raise NewtonDivergence(k, norm, params.newton_max_iters)
        v[k] = u

    vx, vxx = _derive(grid, v)
    return ValueSurface(grid, v, vx, vxx, "penalized",
                        {"eps": eps, "delta": delta, "alpha0": alpha0,
                         "newton_tol": params.newton_tol})


def _gradient_sweep(u: np.ndarray, cap: float) -> np.ndarray:
    """Increasing-x sweep u[i] := min(u[i], u[i-1] + cap), vectorized.

    Equivalent to the sequential sweep: the result is
    min_{j <= i} (u[j] + (i - j) cap).
    """
    idx = np.arange(len(u))
    shear = u - cap * idx
    return np.minimum.accumulate(shear) + cap * idx


def solve_projected(spec: GameSpec, grid: Grid, fp_tol: float = 1e-12,
                    fp_max: int = 50) -> ValueSurface:
    """Double-projection value surface (implicit step + obstacle + gradient).

    The output satisfies v >= g exactly and the discrete constraint
    v[i] - v[i-1] <= alpha0 dx exactly.
    """
    st = _Stencil(spec, grid)
    n, dt, dx = grid.n_x, grid.dt, grid.dx
    alpha0 = spec.alpha0
    cap = alpha0 * dx
    t_nodes = grid.t_nodes
    v = np.empty((grid.n_t, n))
    v[-1, :] = spec.g(spec.T)

    # banded matrix of  u/dt - (L - r) u  with edge rows; constant in time
    ab = np.zeros((4, n))
    ab[0, 2:] = -st.upper[1:-1]
    ab[1, 1:-1] = 1.0 / dt - st.diag[1:-1]
    ab[2, :-2] = -st.lower[1:-1]
    _edge_rows(ab, st)

    for k in range(grid.n_t - 2, -1, -1):
        t_k = t_nodes[k]
        h_k = np.asarray(spec.h(t_k, grid.x_nodes), dtype=float)
        g_k = float(spec.g(t_k))
        rhs = v[k + 1] / dt + h_k
        rhs[0], rhs[-1] = _edge_rhs(st, g_k, alpha0)
        u = solve_banded((2, 1), ab, rhs)
        for sweep in range(fp_max):
            u_new = _gradient_sweep(np.maximum(u, g_k), cap)
            change = float(np.max(np.abs(u_new - u)))
            u = u_new
            if change < fp_tol:
                break
        else:
            raise FixedPointStall(
                f"projections not converged at time index {k} (change {change:.3e})")
        v[k] = u

    vx, vxx = _derive(grid, v)
    return ValueSurface(grid, v, vx, vxx, "projected",
                        {"fp_tol": fp_tol, "alpha0": alpha0})


@dataclass
class ResidualReport:
    maxmin: np.ndarray       # max{min{PDE, alpha0 - |v_x|}, g - v}
    minmax: np.ndarray       # min{max{PDE, g - v}, alpha0 - |v_x|}
    pde: np.ndarray          # dv/dt + L v - r v + h (forward time difference)
    mask: np.ndarray         # interior nodes entering the norms
    maxmin_sup: float
    maxmin_l1: float
    minmax_sup: float
    minmax_l1: float


def residual_check(surface: ValueSurface, spec: GameSpec,
                   boundaries=None, band_cells: int = 2) -> ResidualReport:
    """Evaluate both variational-inequality expressions on the surface.

    Norms are taken on interior nodes (rows before T, columns away from the
    edges) excluding a ``band_cells``-cell band around the extracted
    boundaries; pass a BoundaryPair to reuse existing curves.
    """
    grid = surface.grid
    v, vx = surface.v, surface.vx
    dt, dx = grid.dt, grid.dx
    x = grid.x_nodes
    t = grid.t_nodes

    g_col = np.asarray(spec.g(t), dtype=float)[:, None]
    h_arr = np.asarray(spec.h(t[:, None], x[None, :]), dtype=float)
    sig2 = np.asarray(spec.sigma(x), dtype=float) ** 2
    mu = np.asarray(spec.mu(x), dtype=float)

    vt = np.empty_like(v)
    vt[:-1] = (v[1:] - v[:-1]) / dt
    vt[-1] = vt[-2]
    pde = vt + 0.5 * sig2 * surface.vxx + mu * vx - spec.r * v + h_arr
    gap_grad = spec.alpha0 - np.abs(vx)
    gap_obst = g_col - v
    maxmin = np.maximum(np.minimum(pde, gap_grad), gap_obst)
    minmax = np.minimum(np.maximum(pde, gap_obst), gap_grad)

    mask = np.zeros_like(v, dtype=bool)
    mask[:-1, 1:-1] = True
    if boundaries is None:
        from .boundaries import extract_a, extract_b
        a_vals = extract_a(surface)
        b_vals = extract_b(surface)
    else:
        a_vals, b_vals = boundaries.a, boundaries.b
    band = band_cells * dx
    for k in range(grid.n_t):
        if np.isfinite(a_vals[k]):
            mask[k, np.abs(x - a_vals[k]) <= band] = False
        if np.isfinite(b_vals[k]):
            mask[k, np.abs(x - b_vals[k]) <= band] = False

    def norms(arr):
        vals = np.abs(arr[mask])
        return float(np.max(vals)), float(np.mean(vals))

    mm_sup, mm_l1 = norms(maxmin)
    mx_sup, mx_l1 = norms(minmax)
    return ResidualReport(maxmin, minmax, pde, mask, mm_sup, mm_l1, mx_sup, mx_l1)
