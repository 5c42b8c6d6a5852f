"""Command-line pipeline: solve, aux, simulate, verify.

Exit codes are the only machine contract: 0 all enabled verdicts pass,
1 verdict failure, 2 configuration error, 3 solver failure.  All human
output goes to stderr; data goes to files in the output directory, written
atomically.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import io as sio
from .aux_stop import compare_vx, sigma_star_curve, solve_aux
from .boundaries import check_boundary_properties, extract_pair, step_values
from .config import RunConfig, load_run_config
from .errors import (BoundaryBelowDomain, ConfigError, ExprSyntaxError,
                     FixedPointStall, GridMismatch, NewtonDivergence,
                     PreconditionFailure, WindowTooSmall)
from .game_sim import ControlRule, StopRule, StrategyPair, deviation_suite, estimate_value
from .grid import build_grid
from .model import validate_assumptions
from .sde import rng_stream
from .vi_solver import PenalizationParams, solve_penalized, solve_projected

_CONFIG_ERRORS = (ConfigError, ExprSyntaxError, WindowTooSmall, FileNotFoundError,
                  KeyError, TypeError)
_SOLVER_ERRORS = (NewtonDivergence, FixedPointStall, PreconditionFailure,
                  GridMismatch, BoundaryBelowDomain)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _out_path(run: RunConfig, name: str) -> str:
    return os.path.join(run.output["directory"], name)


def _precheck(run: RunConfig, force: bool) -> None:
    lo = run.grid_cfg.x_min
    report = validate_assumptions(run.spec, x_window=(lo, run.grid_cfg.x_max))
    if not report.passed:
        _log("assumption check failed:")
        _log(report.summary())
        if not force:
            raise ConfigError("assumptions not satisfied (use --force to override)")
        _log("continuing under --force")


def _solve_surfaces(run: RunConfig):
    grid = build_grid(run.spec, run.grid_cfg)
    solver = run.solver
    surfaces = {}
    if solver["scheme"] in ("penalized", "both"):
        params = PenalizationParams(solver["eps"], solver["delta"],
                                    solver["newton_tol"], solver["newton_max_iters"])
        surfaces["penalized"] = solve_penalized(run.spec, grid, params)
    if solver["scheme"] in ("projected", "both"):
        surfaces["projected"] = solve_projected(run.spec, grid)
    for s in surfaces.values():
        s.params["alpha0"] = run.spec.alpha0
    return grid, surfaces


def _write_manifest(run: RunConfig) -> None:
    sio.atomic_write_text(_out_path(run, "manifest.json"),
                          json.dumps(run.manifest(), indent=2, sort_keys=True) + "\n")


def _primary_surface(run: RunConfig, surfaces: dict):
    # projected surfaces carry exact constraints, so boundary extraction
    # prefers them when both schemes ran
    return surfaces.get("projected") or surfaces["penalized"]


def cmd_solve(run: RunConfig, force: bool) -> int:
    _precheck(run, force)
    grid, surfaces = _solve_surfaces(run)
    failures = 0
    for name, surface in surfaces.items():
        sio.write_surface(_out_path(run, f"surface_{name}.bin"), surface,
                          run.manifest()["spec_hash"])
        if "csv" in run.output["formats"]:
            sio.surface_to_csv(surface, run.spec, _out_path(run, f"surface_{name}.csv"))
        pair = extract_pair(surface, run.spec, run.solver["gap_tol"],
                            run.solver["grad_tol"])
        sio.boundaries_to_csv(pair, _out_path(run, f"boundaries_{name}.csv"))
        report = check_boundary_properties(pair, run.spec, surface,
                                           run.solver["fit_tol"], run.solver["jump_tol"])
        _log(f"[{name}] boundary properties:")
        _log(report.summary())
        if not report.passed:
            failures += 1
        edge = grid.x_max - 5 * grid.dx
        finite_b = pair.b[np.isfinite(pair.b) & ~pair.b_at_window_edge]
        if finite_b.size and np.max(finite_b) > edge:
            _log(f"[{name}] warning: extracted b within 5 cells of the window edge")
        low_edge = grid.x_min + 5 * grid.dx
        finite_a = pair.a[np.isfinite(pair.a) & ~pair.a_at_window_edge]
        if finite_a.size and np.min(finite_a) < low_edge:
            _log(f"[{name}] warning: extracted a within 5 cells of the lower window edge")
    _write_manifest(run)
    return 1 if failures else 0


def _load_or_solve(run: RunConfig, force: bool):
    """Stages consume the solve stage's files when present."""
    surfaces = {}
    for name in ("projected", "penalized"):
        path = _out_path(run, f"surface_{name}.bin")
        if os.path.exists(path):
            surface, _ = sio.read_surface(path)
            surface.params.setdefault("alpha0", run.spec.alpha0)
            surfaces[name] = surface
    if surfaces:
        grid = next(iter(surfaces.values())).grid
        return grid, surfaces
    _precheck(run, force)
    return _solve_surfaces(run)


def cmd_aux(run: RunConfig, force: bool) -> int:
    grid, surfaces = _load_or_solve(run, force)
    surface = _primary_surface(run, surfaces)
    pair = extract_pair(surface, run.spec, run.solver["gap_tol"], run.solver["grad_tol"])
    aux = solve_aux(run.spec, grid, pair.a)
    summary = compare_vx(aux, surface)
    star = sigma_star_curve(aux)
    both = np.isfinite(star) & np.isfinite(pair.b) & ~pair.b_at_window_edge
    if pair.b_resolution_limited is not None:
        both &= ~pair.b_resolution_limited
    star_gap = float(np.max(np.abs(star[both] - pair.b[both]))) if both.any() else 0.0

    sio.aux_to_csv(aux, _out_path(run, "aux.csv"))
    tol = run.aux["vx_tol_frac"] * run.spec.alpha0
    star_tol = run.aux["sigma_star_cells"] * grid.dx
    verdicts = {"vx_match": summary.sup <= tol,
                "sigma_star_match": star_gap <= star_tol}
    payload = {"discrepancy": summary.to_dict(), "vx_tol": tol,
               "sigma_star_gap": star_gap, "sigma_star_tol": star_tol,
               "verdicts": verdicts}
    sio.atomic_write_text(_out_path(run, "aux_compare.json"),
                          json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _write_manifest(run)
    _log(f"|w - v_x| sup = {summary.sup:.6g} (tol {tol:.6g}); "
         f"sigma* vs b gap = {star_gap:.6g} (tol {star_tol:.6g})")
    return 0 if all(verdicts.values()) else 1


def _sim_point(run: RunConfig):
    sim = run.simulation
    if sim["x0"] is None:
        raise ConfigError("[simulation] needs x0")
    return float(sim["t0"]), float(sim["x0"])


def cmd_simulate(run: RunConfig, force: bool, threads: int) -> int:
    grid, surfaces = _load_or_solve(run, force)
    surface = _primary_surface(run, surfaces)
    pair = extract_pair(surface, run.spec, run.solver["gap_tol"], run.solver["grad_tol"])
    t0, x0 = _sim_point(run)
    sim = run.simulation
    eq_pair = StrategyPair(StopRule.hit_boundary(pair.t_nodes, pair.a),
                           ControlRule.reflect(pair.t_nodes, pair.b), "equilibrium")
    mean, se = estimate_value(run.spec, eq_pair, t0, x0, sim["n_paths"],
                              sim["seed"], n_steps=sim["n_steps"],
                              antithetic=sim["antithetic"], threads=threads)
    from .boundaries import interp_surface
    v_ref = interp_surface(surface, "v", t0, x0)
    dt = (run.spec.T - t0) / sim["n_steps"]
    margin = 3 * se + sim["allowance_c"] * (math.sqrt(dt) + grid.dx)
    verdict = abs(mean - v_ref) <= margin

    # a few sample reflected paths for plotting
    times = t0 + dt * np.arange(sim["n_steps"] + 1)
    from .game_sim import _simulate_block
    rng = rng_stream(sim["seed"], 0)
    dW = rng.standard_normal((min(8, sim["n_paths"]), sim["n_steps"])) * math.sqrt(dt)
    f_vals = step_values(pair.t_nodes, pair.b, times)
    xs, _, _ = _simulate_block(run.spec, x0, dt, dW, f_vals)
    sio.paths_to_csv(times, pair, list(xs), _out_path(run, "sample_paths.csv"))

    payload = {"estimate": mean, "std_error": se, "pde_value": v_ref,
               "gap": abs(mean - v_ref), "margin": margin, "verdict": verdict}
    sio.atomic_write_text(_out_path(run, "payoff_estimate.json"),
                          json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _write_manifest(run)
    _log(f"J = {mean:.6f} +- {se:.6f}; v = {v_ref:.6f}; "
         f"gap {abs(mean - v_ref):.2e} vs margin {margin:.2e}")
    return 0 if verdict else 1


def cmd_verify(run: RunConfig, force: bool, threads: int) -> int:
    _precheck(run, force)
    run.solver["scheme"] = "both"
    grid, surfaces = _solve_surfaces(run)
    pen, proj = surfaces["penalized"], surfaces["projected"]
    failures = []

    gap = float(np.max(np.abs(pen.v[:, 1:-1] - proj.v[:, 1:-1])))
    if gap > run.verify["cross_scheme_tol"]:
        failures.append(f"cross-scheme gap {gap:.3e}")
    _log(f"cross-scheme sup gap (interior): {gap:.3e}")

    pair = extract_pair(proj, run.spec, run.solver["gap_tol"], run.solver["grad_tol"])
    prop = check_boundary_properties(pair, run.spec, proj,
                                     run.solver["fit_tol"], run.solver["jump_tol"])
    _log(prop.summary())
    if not prop.passed:
        failures.append("boundary properties")

    aux = solve_aux(run.spec, grid, pair.a)
    summary = compare_vx(aux, proj)
    tol = run.aux["vx_tol_frac"] * run.spec.alpha0
    _log(f"|w - v_x| sup = {summary.sup:.6g} (tol {tol:.6g})")
    if summary.sup > tol:
        failures.append("auxiliary representation")

    t0, x0 = _sim_point(run)
    sim = run.simulation
    report = deviation_suite(run.spec, proj, pair, t0, x0, sim["n_paths"],
                             sim["seed"], n_steps=sim["n_steps"],
                             allowance_c=sim["allowance_c"], threads=threads)
    _log(report.to_text())
    if not report.all_passed:
        failures.append("saddle verification")

    bundle = {"cross_scheme_gap": gap,
              "boundary_properties": [v.__dict__ for v in prop.verdicts],
              "aux_discrepancy": summary.to_dict(),
              "saddle": report.to_dict(),
              "failures": failures}
    sio.atomic_write_text(_out_path(run, "saddle_report.json"),
                          json.dumps(bundle, indent=2, sort_keys=True, default=str) + "\n")
    sio.atomic_write_text(_out_path(run, "saddle_report.txt"), report.to_text() + "\n")
    sio.boundaries_to_csv(pair, _out_path(run, "boundaries_projected.csv"))
    _write_manifest(run)
    if failures:
        _log("FAILED: " + "; ".join(failures))
        return 1
    _log("all verdicts passed")
    return 0


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(prog="stopgame",
                                     description="stopper vs singular-controller game lab")
    parser.add_argument("command", choices=["solve", "aux", "simulate", "verify"])
    parser.add_argument("--config", required=True, help="TOML config path")
    parser.add_argument("--out", help="override output directory")
    parser.add_argument("--seed", type=int, help="override simulation seed")
    parser.add_argument("--force", action="store_true",
                        help="run even if assumption checks fail")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        run = load_run_config(args.config)
        if args.out:
            run.output["directory"] = args.out
            run.resolved["output"]["directory"] = args.out
        if args.seed is not None:
            run.simulation["seed"] = args.seed
            run.resolved["simulation"]["seed"] = args.seed
        os.makedirs(run.output["directory"], exist_ok=True)
        if args.command == "solve":
            return cmd_solve(run, args.force)
        if args.command == "aux":
            return cmd_aux(run, args.force)
        if args.command == "simulate":
            return cmd_simulate(run, args.force, args.threads)
        return cmd_verify(run, args.force, args.threads)
    except _CONFIG_ERRORS as err:
        _log(f"config error: {err}")
        return 2
    except _SOLVER_ERRORS as err:
        _log(f"solver failure: {err}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
