"""Space-time lattice with truncation of the unbounded state space.

The left edge carries a Dirichlet value v = g(t) (the stopping region covers
low x on the real line; v(t, 0) = g(t) on the half line).  The right edge
uses, by default, a linear-extrapolation row (v_xx = 0): exact inside the
action region, where the value is linear with slope alpha0, and still
consistent near the horizon, where the action boundary always leaves any
finite window.  ``right_bc="gradient"`` instead imposes v_x = alpha0
actively; that variant is only consistent while the action boundary stays
inside the window, and the solvers warn when it does not.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, WindowTooSmall
from .model import Domain, GameSpec, theta_lower

__all__ = ["Grid", "GridConfig", "build_grid"]


@dataclass(frozen=True)
class GridConfig:
    n_t: int = 201
    n_x: int = 801
    x_min: float = 0.0
    x_max: float = 6.0
    spacing: str = "uniform"
    right_bc: str = "extrapolate"   # "extrapolate" | "gradient"
    margin_min: float = 2.0


@dataclass(frozen=True)
class Grid:
    t_nodes: np.ndarray
    x_nodes: np.ndarray
    domain: Domain
    right_bc: str = "gradient"
    truncation_margin: float = field(default=math.inf)

    @property
    def n_t(self) -> int:
        return len(self.t_nodes)

    @property
    def n_x(self) -> int:
        return len(self.x_nodes)

    @property
    def dt(self) -> float:
        return float(self.t_nodes[1] - self.t_nodes[0])

    @property
    def dx(self) -> float:
        return float(self.x_nodes[1] - self.x_nodes[0])

    @property
    def x_min(self) -> float:
        return float(self.x_nodes[0])

    @property
    def x_max(self) -> float:
        return float(self.x_nodes[-1])

    def __post_init__(self):
        if self.n_t < 2 or self.n_x < 3:
            raise ConfigError("need n_t >= 2 and n_x >= 3")
        if not (np.all(np.diff(self.t_nodes) > 0) and np.all(np.diff(self.x_nodes) > 0)):
            raise ConfigError("node arrays must be strictly increasing")
        if self.domain is Domain.HALF_LINE and self.x_nodes[0] != 0.0:
            raise ConfigError("half-line grids must start exactly at x = 0")


def build_grid(spec: GameSpec, cfg: GridConfig) -> Grid:
    """Build the lattice for ``spec``; uniform in both directions.

    Raises WindowTooSmall when the continuation trigger theta_lower(0) is a
    finite positive level and the window does not clear it by
    ``cfg.margin_min``.  A degenerate trigger (theta <= 0 on a 16x-extended
    bracket, theta_lower = +inf) passes with a warning: the continuation
    region is empty, so any window contains it.
    """
    if cfg.spacing != "uniform":
        raise ConfigError(f"unsupported spacing {cfg.spacing!r}")
    if cfg.right_bc not in ("gradient", "extrapolate"):
        raise ConfigError(f"unsupported right_bc {cfg.right_bc!r}")
    x_min = 0.0 if spec.domain is Domain.HALF_LINE else float(cfg.x_min)
    if spec.domain is Domain.HALF_LINE and cfg.x_min != 0.0:
        raise ConfigError("half-line grids must use x_min = 0")
    x_max = float(cfg.x_max)
    if x_max <= x_min:
        raise ConfigError("x_max must exceed x_min")

    probe_hi = x_max * 16 if x_max > 0 else abs(x_min) * 16 + 1.0
    trigger = theta_lower(spec, 0.0, (x_min, probe_hi))
    margin = math.inf
    if math.isfinite(trigger) and trigger > 0:
        margin = x_max / trigger
        if x_max <= cfg.margin_min * trigger:
            raise WindowTooSmall(
                f"x_max = {x_max} <= {cfg.margin_min} * theta_lower(0) = "
                f"{cfg.margin_min * trigger:.6g}")
    elif math.isinf(trigger) and trigger > 0:
        warnings.warn("theta <= 0 on the probe bracket: degenerate instance, "
                      "window check skipped", stacklevel=2)

    t_nodes = np.linspace(0.0, spec.T, cfg.n_t)
    x_nodes = np.linspace(x_min, x_max, cfg.n_x)
    return Grid(t_nodes, x_nodes, spec.domain, cfg.right_bc, margin)
