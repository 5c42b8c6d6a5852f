"""File outputs: CSV exports, a compact binary surface container with a JSON
header, and atomic writes (temp file + rename).

Floats are formatted with ``repr`` (shortest round-trip), so identical arrays
produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Sequence

import numpy as np

from .aux_stop import AuxSurface
from .boundaries import BoundaryPair, step_values
from .grid import Grid
from .model import Domain
from .vi_solver import ValueSurface

__all__ = [
    "atomic_write_bytes", "atomic_write_text", "surface_to_csv",
    "boundaries_to_csv", "aux_to_csv", "paths_to_csv",
    "write_surface", "read_surface",
]

_MAGIC = b"SGSF01\n"


def atomic_write_bytes(path: str, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _f(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def surface_to_csv(surface: ValueSurface, spec, path: str,
                   residuals: bool = True) -> None:
    """Columns t, x, v, vx (+ both VI residual expressions)."""
    grid = surface.grid
    lines = []
    if residuals:
        from .vi_solver import residual_check
        rep = residual_check(surface, spec)
        lines.append("t,x,v,vx,maxmin,minmax")
        for k in range(grid.n_t):
            t = grid.t_nodes[k]
            for i in range(grid.n_x):
                lines.append(f"{_f(t)},{_f(grid.x_nodes[i])},{_f(surface.v[k, i])},"
                             f"{_f(surface.vx[k, i])},{_f(rep.maxmin[k, i])},"
                             f"{_f(rep.minmax[k, i])}")
    else:
        lines.append("t,x,v,vx")
        for k in range(grid.n_t):
            t = grid.t_nodes[k]
            for i in range(grid.n_x):
                lines.append(f"{_f(t)},{_f(grid.x_nodes[i])},"
                             f"{_f(surface.v[k, i])},{_f(surface.vx[k, i])}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def boundaries_to_csv(pair: BoundaryPair, path: str) -> None:
    n = len(pair.t_nodes)
    a_lim = pair.a_resolution_limited
    b_lim = pair.b_resolution_limited
    a_lim = np.zeros(n, dtype=bool) if a_lim is None else a_lim
    b_lim = np.zeros(n, dtype=bool) if b_lim is None else b_lim
    lines = ["t,a,b,a_at_window_edge,b_at_window_edge,"
             "a_resolution_limited,b_resolution_limited"]
    for k in range(n):
        lines.append(f"{_f(pair.t_nodes[k])},{_f(pair.a[k])},{_f(pair.b[k])},"
                     f"{int(pair.a_at_window_edge[k])},{int(pair.b_at_window_edge[k])},"
                     f"{int(a_lim[k])},{int(b_lim[k])}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def aux_to_csv(aux: AuxSurface, path: str) -> None:
    grid = aux.grid
    lines = ["t,x,w,absorbed"]
    for k in range(grid.n_t):
        t = grid.t_nodes[k]
        for i in range(grid.n_x):
            lines.append(f"{_f(t)},{_f(grid.x_nodes[i])},{_f(aux.w[k, i])},"
                         f"{int(aux.absorbed_mask[k, i])}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def paths_to_csv(times: np.ndarray, pair: BoundaryPair,
                 sample_paths: Sequence[np.ndarray], path: str) -> None:
    """Plot-ready overlay: t, a, b, then one column per sample path."""
    a = step_values(pair.t_nodes, pair.a, times)
    b = step_values(pair.t_nodes, pair.b, times)
    header = "t,a,b," + ",".join(f"path{i}" for i in range(len(sample_paths)))
    lines = [header]
    for k in range(len(times)):
        row = [_f(times[k]), _f(a[k]), _f(b[k])]
        row += [_f(p[k]) for p in sample_paths]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_surface(path: str, surface: ValueSurface, spec_hash: str = "") -> None:
    """Binary container: magic, u64 header length, JSON header, raw float64
    arrays (t_nodes, x_nodes, v, vx, vxx) in C order."""
    grid = surface.grid
    arrays = [("t_nodes", grid.t_nodes), ("x_nodes", grid.x_nodes),
              ("v", surface.v), ("vx", surface.vx), ("vxx", surface.vxx)]
    header = {
        "format": "stopgame-surface-v1",
        "scheme": surface.scheme,
        "params": {k: v for k, v in surface.params.items()},
        "spec_hash": spec_hash,
        "grid": {"domain": grid.domain.value, "right_bc": grid.right_bc,
                 "truncation_margin": (grid.truncation_margin
                                       if math.isfinite(grid.truncation_margin) else None)},
        "arrays": [{"name": n, "shape": list(np.asarray(a).shape), "dtype": "float64"}
                   for n, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [_MAGIC, len(blob).to_bytes(8, "little"), blob]
    parts += [np.ascontiguousarray(a, dtype=np.float64).tobytes() for _, a in arrays]
    atomic_write_bytes(path, b"".join(parts))


def read_surface(path: str):
    """Read a surface container; returns (ValueSurface, header dict)."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a surface container")
        hlen = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        data = {}
        for rec in header["arrays"]:
            count = int(np.prod(rec["shape"]))
            buf = fh.read(count * 8)
            data[rec["name"]] = np.frombuffer(buf, dtype=np.float64).reshape(rec["shape"]).copy()
    grid = Grid(data["t_nodes"], data["x_nodes"], Domain(header["grid"]["domain"]),
                header["grid"]["right_bc"],
                header["grid"]["truncation_margin"] or math.inf)
    surface = ValueSurface(grid, data["v"], data["vx"], data["vxx"],
                           header["scheme"], dict(header["params"]))
    return surface, header
