"""Config document (TOML) parsing and the run manifest.

Schema (all sections optional unless noted; defaults in parentheses):

[model]    family = "benchmark" | "quadratic_real_line" | "piecewise_power" | "expr"
           family parameters (see README), r, alpha0, horizon
[grid]     n_t (201), n_x (801), x_min (0), x_max (required), right_bc ("gradient")
[solver]   scheme ("both"), eps (1e-3), delta (1e-3), newton_tol, newton_max_iters,
           gap_tol, grad_tol, fit_tol, jump_tol
[aux]      vx_tol_frac (0.05), sigma_star_cells (3.0)
[simulation] n_paths (20000), n_steps (400), seed (0), t0 (0), x0 (required for
           simulate/verify), antithetic (false), allowance_c (1.0)
[verify]   cross_scheme_tol (5e-3)
[output]   directory ("out"), formats (["csv","bin","json"])
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .grid import GridConfig
from .model import (Domain, GameSpec, benchmark_spec, expr_spec,
                    piecewise_power_spec, real_line_quadratic_spec)

__all__ = ["RunConfig", "load_run_config", "build_spec", "model_section", "spec_hash"]


def build_spec(model: dict) -> GameSpec:
    try:
        family = model["family"]
    except KeyError:
        raise ConfigError("[model] needs a 'family' key") from None
    common = {k: model[k] for k in ("r", "alpha0", "horizon") if k in model}
    try:
        if family == "benchmark":
            return benchmark_spec(model["kappa1"], model["kappa2"],
                                  model["mu"], model["sigma"], **common)
        if family == "quadratic_real_line":
            return real_line_quadratic_spec(
                model["beta"], model["c"], model["sigma0"],
                model["q2"], model["q1"], model["q0"],
                g_scale=model.get("g_scale", 0.0),
                g_rate=model.get("g_rate", 1.0), **common)
        if family == "piecewise_power":
            return piecewise_power_spec(
                model["p"], model["knee"], model["shift"], model["sigma"],
                model["kappa1"], model["kappa2"], **common)
        if family == "expr":
            return expr_spec(Domain(model["domain"]), model["mu"], model["g"],
                             model["h"], sigma0=model.get("sigma0", 0.0),
                             sigma1=model.get("sigma1", 0.0), **common)
    except KeyError as err:
        raise ConfigError(f"[model] family {family!r} is missing key {err}") from None
    raise ConfigError(f"unknown model family {family!r}")


def model_section(spec: GameSpec) -> dict:
    """Serialize a family-built spec back to its [model] table."""
    if "family" not in spec.meta:
        raise ConfigError("spec was not built from a config family")
    out = dict(spec.meta)
    # family helpers use explicit *_lin names internally
    for meta_key, cfg_key in (("mu_lin", "mu"), ("sigma_lin", "sigma")):
        if meta_key in out:
            out[cfg_key] = out.pop(meta_key)
    out.update(r=spec.r, alpha0=spec.alpha0, horizon=spec.T)
    if out["family"] == "expr":
        out["domain"] = spec.domain.value
        out["sigma0"] = spec.sigma0
        out["sigma1"] = spec.sigma1
    return out


def spec_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


@dataclass
class RunConfig:
    spec: GameSpec
    grid_cfg: GridConfig
    solver: dict
    aux: dict
    simulation: dict
    verify: dict
    output: dict
    resolved: dict
    config_sha256: str

    def manifest(self) -> dict:
        return {"resolved_config": self.resolved,
                "config_sha256": self.config_sha256,
                "spec_hash": spec_hash(self.resolved.get("model", {})),
                "package": "stopgame 0.1.0"}


_SOLVER_DEFAULTS = {"scheme": "both", "eps": 1e-3, "delta": 1e-3,
                    "newton_tol": 1e-9, "newton_max_iters": 80,
                    "gap_tol": None, "grad_tol": None,
                    "fit_tol": None, "jump_tol": None}
_AUX_DEFAULTS = {"vx_tol_frac": 0.05, "sigma_star_cells": 3.0}
_SIM_DEFAULTS = {"n_paths": 20000, "n_steps": 400, "seed": 0, "t0": 0.0,
                 "x0": None, "antithetic": False, "allowance_c": 1.0}
_VERIFY_DEFAULTS = {"cross_scheme_tol": 5e-3}
_OUT_DEFAULTS = {"directory": "out", "formats": ["csv", "bin", "json"]}


def _merge(defaults: dict, given: dict, section: str) -> dict:
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    out = dict(defaults)
    out.update(given)
    return out


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        doc = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None
    if "model" not in doc:
        raise ConfigError("config needs a [model] section")
    spec = build_spec(doc["model"])

    grid_given = doc.get("grid", {})
    if "x_max" not in grid_given:
        raise ConfigError("[grid] needs x_max")
    grid_fields = {f.name: f.default for f in dataclasses.fields(GridConfig)}
    grid_kw = _merge(grid_fields, grid_given, "grid")
    grid_cfg = GridConfig(**grid_kw)

    solver = _merge(_SOLVER_DEFAULTS, doc.get("solver", {}), "solver")
    if solver["scheme"] not in ("penalized", "projected", "both"):
        raise ConfigError(f"unknown solver scheme {solver['scheme']!r}")
    aux = _merge(_AUX_DEFAULTS, doc.get("aux", {}), "aux")
    sim = _merge(_SIM_DEFAULTS, doc.get("simulation", {}), "simulation")
    verify = _merge(_VERIFY_DEFAULTS, doc.get("verify", {}), "verify")
    output = _merge(_OUT_DEFAULTS, doc.get("output", {}), "output")

    resolved = {"model": doc["model"], "grid": grid_kw, "solver": solver,
                "aux": aux, "simulation": sim, "verify": verify, "output": output}
    return RunConfig(spec, grid_cfg, solver, aux, sim, verify, output,
                     resolved, hashlib.sha256(raw).hexdigest())
