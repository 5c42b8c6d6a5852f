"""stopgame: a numerical laboratory for finite-horizon zero-sum games between
a stopper and a singular controller on a one-dimensional diffusion.

Pipeline: build a GameSpec, solve the variational inequality by two
independent schemes, extract the stopping and action boundaries, check the
auxiliary absorbed-stopping representation of the value's spatial derivative,
and verify the boundary-built saddle point by Monte Carlo simulation of the
reflected optimal control.
"""

from .errors import (AssumptionViolation, BoundaryBelowDomain, ConfigError,
                     DomainError, ExprSyntaxError, FixedPointStall,
                     GridMismatch, NewtonDivergence, PreconditionFailure,
                     UnknownIdentifier, WindowTooSmall)
from .model import (Domain, GameSpec, ScalarFn, benchmark_spec, expr_spec,
                    piecewise_power_spec, real_line_quadratic_spec, theta,
                    theta_lower, validate_assumptions)
from .grid import Grid, GridConfig, build_grid
from .vi_solver import (PenalizationParams, ValueSurface, psi_eps,
                        residual_check, solve_penalized, solve_projected)
from .oracles import solve_stopping_psor
from .boundaries import (BoundaryPair, check_boundary_properties, extract_a,
                         extract_b, extract_pair, interp_surface, step_values)
from .aux_stop import AuxSurface, compare_vx, lambda_fn, sigma_star_curve, solve_aux
from .sde import (Path, PathConfig, ReflectedPath, first_hitting, rng_stream,
                  simulate_controlled, simulate_uncontrolled, simulate_Y,
                  skorokhod_reflect)
from .game_sim import (ControlRule, SaddleReport, StopRule, StrategyPair,
                       calibrate_allowance, deviation_suite, estimate_value,
                       payoff)

__version__ = "0.1.0"
