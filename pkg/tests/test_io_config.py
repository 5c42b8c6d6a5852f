import json
import os

import numpy as np
import pytest

import stopgame as sg
from stopgame import io as sio
from stopgame.config import build_spec, load_run_config
from stopgame.errors import ConfigError


def test_surface_container_roundtrip(tmp_path, bench, proj101):
    path = str(tmp_path / "surf.bin")
    sio.write_surface(path, proj101, spec_hash="abc123")
    loaded, header = sio.read_surface(path)
    assert header["spec_hash"] == "abc123"
    assert header["scheme"] == "projected"
    assert np.array_equal(loaded.v, proj101.v)
    assert np.array_equal(loaded.vx, proj101.vx)
    assert np.array_equal(loaded.grid.x_nodes, proj101.grid.x_nodes)
    assert loaded.grid.domain == proj101.grid.domain


def test_surface_container_rejects_other_files(tmp_path):
    path = str(tmp_path / "junk.bin")
    with open(path, "wb") as fh:
        fh.write(b"not a container")
    with pytest.raises(ValueError):
        sio.read_surface(path)


def test_csv_outputs_deterministic(tmp_path, bench, proj101, pair101):
    p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    sio.surface_to_csv(proj101, bench, p1, residuals=False)
    sio.surface_to_csv(proj101, bench, p2, residuals=False)
    assert open(p1, "rb").read() == open(p2, "rb").read()
    sio.boundaries_to_csv(pair101, str(tmp_path / "bd.csv"))
    header = open(tmp_path / "bd.csv").readline().strip().split(",")
    assert header[:3] == ["t", "a", "b"]


def test_atomic_write_replaces(tmp_path):
    path = str(tmp_path / "f.txt")
    sio.atomic_write_text(path, "one")
    sio.atomic_write_text(path, "two")
    assert open(path).read() == "two"
    assert [p for p in os.listdir(tmp_path) if p.endswith(".tmp")] == []


def _write_config(tmp_path, body):
    path = tmp_path / "cfg.toml"
    path.write_text(body)
    return str(path)


BASE = """
[model]
family = "benchmark"
kappa1 = 1.0
kappa2 = 1.0
mu = 0.05
sigma = 0.4
r = 0.02
alpha0 = 3.5
horizon = 1.0

[grid]
x_max = 4.2
"""


def test_load_run_config_defaults(tmp_path):
    run = load_run_config(_write_config(tmp_path, BASE))
    assert run.grid_cfg.n_t == 201 and run.grid_cfg.right_bc == "extrapolate"
    assert run.solver["scheme"] == "both"
    assert run.simulation["n_paths"] == 20000
    manifest = run.manifest()
    assert manifest["config_sha256"] == run.config_sha256
    assert "resolved_config" in manifest


def test_config_missing_x_max(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(_write_config(tmp_path, BASE.replace("x_max = 4.2", "")))


def test_config_unknown_key(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(_write_config(tmp_path, BASE + "\n[solver]\nbogus = 1\n"))


def test_config_alpha0_zero_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(_write_config(tmp_path, BASE.replace("alpha0 = 3.5",
                                                             "alpha0 = 0.0")))


def test_config_bad_toml(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(_write_config(tmp_path, "[model\nfamily="))


def test_build_spec_families():
    spec = build_spec({"family": "expr", "domain": "half_line", "mu": "0.1*x",
                       "g": "0", "h": "x^2 - 1", "sigma1": 0.3, "alpha0": 1.0,
                       "horizon": 0.5})
    assert spec.domain is sg.Domain.HALF_LINE
    with pytest.raises(ConfigError):
        build_spec({"family": "nope"})
    with pytest.raises(ConfigError):
        build_spec({"family": "benchmark", "kappa1": 1.0})  # missing keys


def test_spec_hash_stable():
    from stopgame.config import spec_hash
    a = spec_hash({"family": "benchmark", "kappa1": 1.0})
    b = spec_hash({"kappa1": 1.0, "family": "benchmark"})
    assert a == b and len(a) == 64


def test_model_section_roundtrip():
    from stopgame.config import model_section
    for spec in [sg.benchmark_spec(1, 1, 0.05, 0.4),
                 sg.piecewise_power_spec(2.0, 1.0, 0.5, 0.4, 1.0, 1.0),
                 sg.real_line_quadratic_spec(-0.2, 0.0, 0.5, 0.0, 1.0, 0.0,
                                             g_scale=-0.2, g_rate=-1.0, alpha0=0.5),
                 sg.expr_spec(sg.Domain.HALF_LINE, mu="0.1*x", g="0",
                              h="x^2 - 1", sigma1=0.3, alpha0=1.0)]:
        clone = build_spec(model_section(spec))
        lo = 0.1 if spec.domain is sg.Domain.HALF_LINE else -2.0
        xs = np.linspace(lo, 3.0, 7)
        assert np.allclose(np.asarray(spec.h(0.3, xs)), np.asarray(clone.h(0.3, xs)))
        assert np.allclose(np.asarray(spec.mu(xs)), np.asarray(clone.mu(xs)))
        assert float(spec.g(0.4)) == pytest.approx(float(clone.g(0.4)))
        assert clone.alpha0 == spec.alpha0 and clone.T == spec.T
