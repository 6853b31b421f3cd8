import json
import math

import pytest

from cutlab.cli import main


def run(tmp_path, *args, out="out"):
    d = tmp_path / out
    code = main([*args, f"--out={d}"])
    return code, d


def test_radii_sphere(tmp_path):
    code, d = run(tmp_path, "radii", "--family=sphere", "--p=0,0,1")
    assert code == 0
    doc = json.loads((d / "radii.json").read_text())
    assert doc["kind"] == "radii"
    assert doc["config"]["family"] == "sphere"
    assert doc["result"]["injrad"] == pytest.approx(math.pi, abs=1e-6)


def test_geodesic_outputs(tmp_path):
    code, d = run(tmp_path, "geodesic", "--family=sphere", "--p=0,0,1", "--theta=0.5", "--length=4")
    assert code == 0
    for name in ("geodesic.csv", "geodesic.json", "geodesic.svg"):
        assert (d / name).exists()
    doc = json.loads((d / "geodesic.json").read_text())
    assert doc["result"]["conjugate_time"] == pytest.approx(math.pi, abs=1e-6)


def test_dichotomy_flat_p_equals_q(tmp_path):
    code, d = run(tmp_path, "dichotomy", "--family=flat_torus", "--p=0,0")
    assert code == 0
    res = json.loads((d / "dichotomy.json").read_text())["result"]
    assert res["all_hold"]
    assert res["closed_geodesic"]["closed"]
    assert all(v["branch_through"] and v["through_count"] == 2 for v in res["verdicts"])
    assert (d / "fatlas.csv").exists() and (d / "dichotomy.svg").exists()


def test_outputs_byte_identical(tmp_path):
    args = ("cutlocus", "--family=flat_torus", "--p=0.1,0.2")
    _, a = run(tmp_path, *args, out="a")
    _, b = run(tmp_path, *args, out="b")
    for name in ("cutlocus.csv", "cutlocus.json", "cutlocus.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_file_with_override(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("family = flat_torus\na = 1\nb = 2\np = 0, 0\n")
    code, d = run(tmp_path, "radii", f"--config={f}", "--b=3")
    assert code == 0
    doc = json.loads((d / "radii.json").read_text())
    assert doc["config"]["b"] == 3.0
    assert doc["result"]["injrad"] == 0.5


def test_missing_family_exit_1(tmp_path, capsys):
    code, _ = run(tmp_path, "radii", "--p=0,0,1")
    assert code == 1
    assert "family" in capsys.readouterr().err


def test_bad_value_exit_1(tmp_path, capsys):
    code, _ = run(tmp_path, "radii", "--family=sphere", "--p=0,0,1", "--n_dirs=ten")
    assert code == 1
    assert "n_dirs" in capsys.readouterr().err


def test_q_on_cut_locus_exit_1(tmp_path, capsys):
    code, _ = run(tmp_path, "dichotomy", "--family=flat_torus", "--p=0,0", "--q=0.5,0.1")
    assert code == 1
    assert "C_p" in capsys.readouterr().err


def test_unknown_command():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
