import json
from pathlib import Path

import pytest

from dumbbell.cli import main
from dumbbell.fem import read_field_csv
from dumbbell.mesh import load_text

SMALL = """
name = "cli"
rng_seed = 3
[geometry]
width = 2.0
height = 2.0
f1 = 0.5
f2 = 0.5
[potential]
name = "quartic"
[seed]
alpha = -1.0
beta = 1.0
[family]
kind = "power"
c = 1.0
exponent = 1.0
[sweep]
eps = [0.1, 0.07, 0.05]
[mesh]
h_bulk = 0.1
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(SMALL)
    return p


def only_dir(root: Path, prefix: str) -> Path:
    found = [d for d in root.iterdir() if d.name.startswith(prefix)]
    assert len(found) == 1
    return found[0]


def test_mesh(cfg, tmp_path, capsys):
    assert main(["mesh", "-c", str(cfg), "-o", str(tmp_path / "out"), "--eps", "0.1"]) == 0
    d = only_dir(tmp_path / "out", "cli-mesh-")
    mesh = load_text(d / "mesh.txt")
    info = json.loads((d / "mesh.json").read_text())
    assert mesh.n_nodes == info["n_nodes"]
    assert info["quality"]["min_angle"] >= 20 - 1e-9
    assert (d / "boundary.csv").read_text().startswith("x,y")


def test_solve(cfg, tmp_path):
    assert main(["solve", "-c", str(cfg), "-o", str(tmp_path), "--eps", "0.1"]) == 0
    d = only_dir(tmp_path, "cli-solve-")
    rep = json.loads((d / "report.json").read_text())
    mesh = load_text(d / "mesh.txt")
    u = read_field_csv(d / "field.csv", mesh.token)
    assert len(u) == mesh.n_nodes
    assert rep["lambda_min"] > 0 and abs(rep["probes"]["u_center"]) < 1e-6


def test_sweep_run_dir_by_hash(cfg, tmp_path, capsys):
    assert main(["sweep", "-c", str(cfg), "-o", str(tmp_path)]) == 0
    d = only_dir(tmp_path, "cli-")
    assert {p.name for p in d.iterdir()} >= {"records.csv", "fits.json", "summary.txt"}
    assert "criterion 10" in capsys.readouterr().out
    assert main(["sweep", "-c", str(cfg), "-o", str(tmp_path), "--seed", "9"]) == 0
    assert len(list(tmp_path.iterdir())) == 3  # config, two run directories


def test_limits(tmp_path, capsys):
    assert main(["limits", "--kind", "halfstrip", "--R", "20", "-o", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["slope_identity"]["ratio"] == pytest.approx(1.0, abs=0.1)
    d = only_dir(tmp_path, "run-limits-")
    assert (d / "field.csv").exists() and (d / "diagnostics.json").exists()


def test_verify(tmp_path, capsys):
    assert main(["verify", "closedform", "--n", "200", "-o", str(tmp_path)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["closedform"]["pass"] and rep["pass"]
    assert (tmp_path / "verify-closedform.json").exists()
    assert main(["verify", "fem"]) == 0


def test_classify(cfg, tmp_path, capsys):
    assert main(["classify", "-c", str(cfg), "-o", str(tmp_path), "--eps", "0.1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n_nonconstant"] == out["expected_nonconstant"] == 2


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text(SMALL.replace("eps = [0.1, 0.07, 0.05]", "eps = [0.05, 0.1]"))
    assert main(["sweep", "-c", str(p), "-o", str(tmp_path)]) == 2
    assert "decreasing" in capsys.readouterr().err
