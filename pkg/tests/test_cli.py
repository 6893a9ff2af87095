import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from fresnel_lab.cli import main
from fresnel_lab.grid import GridSpec, SampledField, read_field, write_field

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(tmp_path, name, cfg, *extra):
    path = tmp_path / f"{name}.json"
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg, indent=1))
    out = tmp_path / f"out_{name}"
    return main([extra[0] if extra else "propagate", str(path), "--out-dir", str(out), *extra[1:]]), out


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_propagate_writes_outputs_and_manifest(tmp_path):
    out = tmp_path / "prop"
    code = main(["propagate", str(CONFIGS / "propagate_m2.json"), "--out-dir", str(out), "--seed", "3"])
    assert code == 0
    table = rows(out / "propagate.csv")
    assert [float(r["t"]) for r in table] == [0.5, 1.0, 2.0]
    l2 = [float(r["l2"]) for r in table]
    assert max(l2) - min(l2) < 1e-12
    u = read_field(out / "u_0002.fld")
    assert u.grid == GridSpec(1, 1024, 64.0)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "propagate" and manifest["seed"] == 3
    data = (out / "propagate.csv").read_bytes()
    assert manifest["output_digests"]["propagate.csv"] == hashlib.sha256(data).hexdigest()
    assert manifest["input_digest"] == hashlib.sha256((CONFIGS / "propagate_m2.json").read_bytes()).hexdigest()


def test_runs_are_reproducible(tmp_path):
    cfg = {"grid": {"d": 1, "N": 64, "L": 16.0}, "symbol": {"kind": "radial_power", "m": 2, "d": 1},
           "f": {"kind": "random_phase"}, "t_list": [0.1]}
    a = tmp_path / "a"
    b = tmp_path / "b"
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["propagate", str(path), "--out-dir", str(a), "--seed", "7"]) == 0
    assert main(["propagate", str(path), "--out-dir", str(b), "--seed", "7"]) == 0
    assert (a / "u_0000.fld").read_bytes() == (b / "u_0000.fld").read_bytes()


def test_solve_dirac(tmp_path):
    out = tmp_path / "solve"
    assert main(["solve", str(CONFIGS / "solve_dirac_m4.json"), "--out-dir", str(out)]) == 0
    traj = json.loads((out / "trajectory.json").read_text())
    w = traj["windows"][0]
    assert max(w["ratios"]) <= 0.6 and w["residual"] <= 1e-10
    assert len(rows(out / "diagnostics.csv")) == 129
    assert (out / "u_0001.fld").exists()


def test_datum_from_file(tmp_path):
    g = GridSpec(1, 64, 16.0)
    x = g.axis()
    write_field(tmp_path / "f.fld", SampledField(g, np.exp(-np.pi * x**2)))
    cfg = {"grid": {"d": 1, "N": 64, "L": 16.0}, "symbol": {"kind": "radial_power", "m": 2, "d": 1},
           "f": {"kind": "file", "params": {"path": "f.fld"}}, "t_list": [0.0]}
    code, out = run(tmp_path, "file", cfg)
    assert code == 0
    assert np.allclose(read_field(out / "u_0000.fld").values, np.exp(-np.pi * x**2))


def test_potential_ft_and_cone_check(tmp_path):
    out = tmp_path / "sph"
    assert main(["potential-ft", str(CONFIGS / "sphere_ft.json"), "--out-dir", str(out)]) == 0
    report = json.loads((out / "thresholds.json").read_text())
    assert report["threshold"] == 3.0
    first = rows(out / "ft.csv")[0]
    assert float(first["re"]) == pytest.approx(4 * np.pi)
    out = tmp_path / "cone"
    assert main(["cone-check", str(CONFIGS / "cone_m2_d2.json"), "--out-dir", str(out)]) == 0
    cone = json.loads((out / "cone.json").read_text())
    assert cone["ratio"] > 0 and cone["relative_change"] < 0.1


def test_norms_subcommand(tmp_path):
    cfg = {"grid": {"d": 1, "N": 256, "L": 32.0}, "field": {"kind": "gaussian", "params": {"width": 1.0}},
           "pairs": [[1, "inf"], [2, 2]], "x_stride": 2}
    code, out = run(tmp_path, "norms", cfg, "norms")
    assert code == 0
    table = rows(out / "norms.csv")
    assert float(table[0]["modulation"]) == pytest.approx(1.0, rel=1e-6)
    assert float(table[1]["amalgam"]) == pytest.approx(2**-0.5, rel=1e-6)


def test_config_errors_exit_2_with_line_numbers(tmp_path, capsys):
    code, out = run(tmp_path, "bad", '{\n  "grid": {"d": 1, "N": 64, "L": 16.0},\n  "symbol": {"kind": "cubic"},\n'
                    '  "f": {"kind": "gaussian"},\n  "t_list": [1]\n}\n')
    assert code == 2 and not out.exists()
    assert "line 3" in capsys.readouterr().err
    code, _ = run(tmp_path, "json", '{\n  "grid": ,\n}')
    assert code == 2
    assert "line 2" in capsys.readouterr().err
    code, _ = run(tmp_path, "missing", {"symbol": {"kind": "radial_power", "m": 2}}, "decay-scan")
    assert code == 2


def test_mode_errors_exit_2(tmp_path):
    out = tmp_path / "nl"
    assert main(["solve", str(CONFIGS / "solve_nonlinear_global.json"), "--out-dir", str(out)]) == 2
    assert not out.exists()
    cfg = json.loads((CONFIGS / "solve_dirac_m4.json").read_text())
    cfg["symbol"]["m"] = 2
    assert run(tmp_path, "m2", cfg, "solve")[0] == 2


def test_aliasing_exits_3(tmp_path):
    cfg = {"grid": {"d": 1, "N": 64, "L": 8.0}, "symbol": {"kind": "radial_power", "m": 2, "d": 1},
           "f": {"kind": "gaussian"}, "t_list": [100.0]}
    code, out = run(tmp_path, "alias", cfg)
    assert code == 3 and not out.exists()


def test_quadrature_refusal_exits_3(tmp_path):
    cfg = json.loads((CONFIGS / "solve_dirac_m4.json").read_text())
    cfg["grid"]["N"] = 256
    cfg["f"]["params"]["width"] = 1.0
    cfg["nodes"] = 12
    assert run(tmp_path, "quad", cfg, "solve")[0] == 3


def test_non_contraction_exits_4(tmp_path):
    cfg = json.loads((CONFIGS / "solve_dirac_m4.json").read_text())
    cfg["potential"]["weights"] = [400.0]
    cfg["step"] = 1.0
    cfg["nodes"] = 16
    cfg["tolerances"]["max_iterations"] = 3
    code, out = run(tmp_path, "nc", cfg, "solve")
    assert code == 4 and not out.exists()
