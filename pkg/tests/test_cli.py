import json

import numpy as np
import pytest

from anisowave import cli
from anisowave.anisotropy import heat_anisotropy
from anisowave.filters import make_spline_filters
from anisowave.grid import Grid, load_grid, save_grid
from anisowave.norms import besov_wavelet_norm
from anisowave.transform import forward

ANISO = {"b": [1, 2], "norm_sum": 1}
CYL = {"lo": [0], "hi": [1], "T": 1}


def run(capsys, cmd, cfg, *extra, tmp_path=None):
    path = tmp_path / f"{cmd}.json"
    path.write_text(json.dumps(cfg))
    code = cli.main([cmd, "--config", str(path), *extra])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def sine(tmp_path):
    p = tmp_path / "g.awgr"
    save_grid(Grid.sample(lambda x, t: np.sin(2 * np.pi * x) * np.cos(np.pi * t), (64, 256), ((0, 1), (0, 1))), p)
    return p


def test_transform_inverse_roundtrip(capsys, tmp_path, sine):
    code, out, _ = run(capsys, "transform", {"input": str(sine), "output": str(tmp_path / "t.awct"), "aniso": ANISO, "J": 3}, tmp_path=tmp_path)
    assert code == 0
    rep = json.loads(out)
    assert [lv["count"] for lv in rep["levels"]] == [224, 1792, 14336]
    code, _, _ = run(capsys, "inverse", {"input": str(tmp_path / "t.awct"), "output": str(tmp_path / "r.awgr")}, tmp_path=tmp_path)
    assert code == 0
    assert np.max(np.abs(load_grid(tmp_path / "r.awgr").data - load_grid(sine).data)) <= 1e-9


def test_constant_input_has_no_detail(capsys, tmp_path):
    p = tmp_path / "c.awgr"
    save_grid(Grid(np.ones((64, 256)), ((0, 1), (0, 1))), p)
    cfg = {"input": str(p), "output": str(tmp_path / "t.awct"), "aniso": ANISO, "J": 3, "mode": "symmetric"}
    code, out, _ = run(capsys, "transform", cfg, tmp_path=tmp_path)
    assert code == 0 and all(lv["energy"] < 1e-12 for lv in json.loads(out)["levels"])


def test_bad_dims_exit_2(capsys, tmp_path):
    p = tmp_path / "b.awgr"
    save_grid(Grid.zeros((63, 256), ((0, 1), (0, 1))), p)
    code, _, err = run(capsys, "transform", {"input": str(p), "output": str(tmp_path / "x"), "aniso": ANISO, "J": 3}, tmp_path=tmp_path)
    assert code == 2 and "axis 0" in err


def test_norms_zero_grid(capsys, tmp_path):
    p = tmp_path / "z.awgr"
    save_grid(Grid.zeros((64, 256), ((0, 1), (0, 1))), p)
    cfg = {"input": str(p), "norm": "besov", "aniso": ANISO, "alpha": 0.5, "p": 2, "q": 2}
    code, out, _ = run(capsys, "norms", cfg, tmp_path=tmp_path)
    assert code == 0 and json.loads(out)["value"] == 0


def test_norms_match_library_exactly(capsys, tmp_path, sine):
    cfg = {"input": str(sine), "norm": "besov", "aniso": ANISO, "alpha": 0.5, "p": 2, "q": 2, "J": 3}
    code, out, _ = run(capsys, "norms", cfg, tmp_path=tmp_path)
    tree = forward(load_grid(sine), make_spline_filters(2, 2), heat_anisotropy(1), 3)
    assert json.loads(out)["value"] == besov_wavelet_norm(tree, 0.5, 2.0, 2.0).value


def test_norms_inadmissible_alpha(capsys, tmp_path, sine):
    cfg = {"input": str(sine), "norm": "besov", "aniso": ANISO, "alpha": 0, "p": 2, "q": 2}
    code, _, err = run(capsys, "norms", cfg, tmp_path=tmp_path)
    assert code == 2 and "alpha" in err


@pytest.mark.parametrize(
    "extra",
    [
        {"norm": "modulus", "alpha": [0.5, 0.25], "p": 2, "q": 2, "k": [1, 1]},
        {"norm": "sobolev", "l": [2, 1], "p": 2},
        {"norm": "w21", "p": 2},
        {"norm": "kondratiev", "aniso": ANISO, "m": "2/3", "gamma": 0.25, "p": 2, "cylinder": CYL},
        {"norm": "adaptivity", "aniso": ANISO, "r": 0.5, "p": 2},
    ],
)
def test_norm_kinds(capsys, tmp_path, sine, extra):
    code, out, _ = run(capsys, "norms", {"input": str(sine), **extra}, tmp_path=tmp_path)
    assert code == 0 and json.loads(out)["value"] > 0


def test_norm_missing_parameter(capsys, tmp_path, sine):
    code, _, err = run(capsys, "norms", {"input": str(sine), "norm": "sobolev", "p": 2}, tmp_path=tmp_path)
    assert code == 2 and "requires l" in err


def test_embed_check(capsys, tmp_path, sine):
    params = {"m": "2/3", "gamma": 0.25, "s": 0.3, "r": 0.2, "p": 2}
    cfg = {"input": str(sine), "aniso": ANISO, "cylinder": CYL, "params": params, "shell_csv": str(tmp_path / "s.csv")}
    code, out, _ = run(capsys, "embed-check", cfg, tmp_path=tmp_path)
    rep = json.loads(out)
    assert code == 0 and rep["ratio"] > 0 and (tmp_path / "s.csv").exists()
    code, _, err = run(capsys, "embed-check", dict(cfg, params=dict(params, r=0.6)), tmp_path=tmp_path)
    assert code == 2 and "r ≥ s·d/(d−1)" in err
    cfg = {"inputs": [str(sine), str(sine)], "aniso": ANISO, "cylinder": CYL, "params": params}
    code, out, _ = run(capsys, "embed-check", cfg, tmp_path=tmp_path)
    corpus = json.loads(out)["corpus"]
    assert code == 0 and len(corpus["ratios"]) == 2 and corpus["ratios"][0] == pytest.approx(rep["ratio"])


def test_heat_convergence_table(capsys, tmp_path):
    cfg = {"kind": "crank_nicolson", "cylinder": CYL, "initial": "sine", "convergence": [32, 64, 128]}
    code, out, _ = run(capsys, "heat", cfg, tmp_path=tmp_path)
    rows = json.loads(out)["convergence"]
    assert code == 0 and rows[0]["ratio"] is None
    assert all(3.5 <= r["ratio"] <= 4.5 for r in rows[1:])


def test_heat_zero_data(capsys, tmp_path):
    cfg = {"kind": "crank_nicolson", "cylinder": CYL, "nx": 8, "nt": 8, "output": str(tmp_path / "u.awgr")}
    code, _, _ = run(capsys, "heat", cfg, tmp_path=tmp_path)
    assert code == 0 and not np.any(load_grid(tmp_path / "u.awgr").data)
    assert json.loads((tmp_path / "u.awgr.json").read_text())["provenance"] == "crank_nicolson"


def test_heat_numerical_failure_exit_3(capsys, tmp_path, monkeypatch):
    import anisowave.heat as heat

    real = heat.exact_temperature

    def broken(*a, **k):
        u = real(*a, **k)
        u.residual = 1.0
        return u

    monkeypatch.setattr(heat, "exact_temperature", broken)
    code, _, err = run(capsys, "heat", {"kind": "sine_mode", "cylinder": CYL, "dims": [8, 8]}, tmp_path=tmp_path)
    assert code == 3 and "residual" in err


def test_rates_emits_csv(capsys, tmp_path, sine):
    prefix = str(tmp_path / "r")
    cfg = {"input": str(sine), "aniso": ANISO, "output_prefix": prefix}
    code, out, _ = run(capsys, "rates", cfg, tmp_path=tmp_path)
    assert code == 0
    assert (tmp_path / "r_nterm.csv").read_text().startswith("N,error\n")
    assert (tmp_path / "r_uniform.csv").exists() and (tmp_path / "r_rates.json").exists()
    assert "adaptive_exponent" in json.loads(out)["summary"]


def test_output_is_byte_identical(capsys, tmp_path, sine):
    cfg = {"input": str(sine), "aniso": ANISO, "threads": 1}
    _, a, _ = run(capsys, "rates", cfg, tmp_path=tmp_path)
    _, b, _ = run(capsys, "rates", dict(cfg, threads=3), tmp_path=tmp_path)
    assert a == b


def test_overrides(capsys, tmp_path, sine):
    cfg = {"input": str(sine), "norm": "w21", "p": 2}
    code, out, _ = run(capsys, "norms", cfg, "--set", "p=1", tmp_path=tmp_path)
    assert code == 0 and json.loads(out)["params"]["p"] == 1
    code, _, err = run(capsys, "norms", cfg, "--set", 'aniso={"b": [1]}', tmp_path=tmp_path)
    assert code == 2 and "scalar" in err
    code, _, err = run(capsys, "norms", cfg, "--set", "p", tmp_path=tmp_path)
    assert code == 2


def test_schema_rejects_unknown_keys(capsys, tmp_path, sine):
    code, _, err = run(capsys, "norms", {"input": str(sine), "norm": "w21", "p": 2, "colour": 1}, tmp_path=tmp_path)
    assert code == 2 and "config invalid" in err


def test_missing_file_exit_2(capsys, tmp_path):
    code, _, _ = run(capsys, "inverse", {"input": str(tmp_path / "nope"), "output": "x"}, tmp_path=tmp_path)
    assert code == 2


def test_every_command_has_a_schema():
    for cmd in cli.COMMANDS:
        s = cli.load_schema(cmd)
        assert s["type"] == "object" and s["additionalProperties"] is False


def test_dumps_format():
    text = cli.dumps({"b": [0.1, float("nan")], "a": 1})
    assert text == '{\n  "a": 1,\n  "b": [0.10000000000000001, null]\n}\n'


def test_demo_small(capsys, tmp_path):
    code, out, _ = run(capsys, "demo-paper", {"output_dir": str(tmp_path / "d"), "nx": 128, "nt": 512}, tmp_path=tmp_path)
    rep = json.loads(out)
    assert code == 0
    assert rep["alpha_bounds"]["3"] == {"improved": "8/3", "baseline": "3/2"}
    assert (tmp_path / "d" / "incompatible_step_nterm.csv").exists()
