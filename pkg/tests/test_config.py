import math

import numpy as np
import pytest

from cutlab.config import load, parse_overrides, read_file
from cutlab.errors import ConfigError
from cutlab.manifold import Family


def test_file_and_overrides(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# ellipsoid run\nfamily = ellipsoid\nc = 0.7   # flattened\np = 1, 0, 0\nn_dirs = 128\n")
    cfg = load(str(f), ["--n_dirs=96"])
    assert cfg.surface.family is Family.ELLIPSOID
    assert cfg.surface.params == (1.0, 1.0, 0.7)
    assert cfg.n_dirs == 96
    np.testing.assert_allclose(cfg.p, [1, 0, 0])


def test_header_is_sorted_and_complete():
    cfg = load(None, {"family": "sphere", "p": "0,0,1"})
    head = cfg.header()
    assert list(head) == sorted(head)
    for key in ("family", "radius", "h", "T_max", "backend", "n_dirs", "p", "seed", "cut_locus_margin"):
        assert key in head
    # output location and pool size do not change results
    assert "out" not in head and "jobs" not in head


def test_surface_coordinates_for_points():
    cfg = load(None, {"family": "torus", "p": f"0,{math.pi}"})
    np.testing.assert_allclose(cfg.p, [1.0, 0.0, 0.0], atol=1e-12)


def test_tolerance_override():
    cfg = load(None, {"family": "sphere", "cut_locus_margin": "0.01"})
    assert cfg.surface.tol.cut_locus_margin == 0.01


def test_missing_family_names_key():
    with pytest.raises(ConfigError) as e:
        load(None, {"p": "0,0,1"})
    assert e.value.key == "family"


@pytest.mark.parametrize(
    "values,key",
    [
        ({"family": "sphere", "bogus": "1"}, "bogus"),
        ({"family": "klein"}, "family"),
        ({"family": "sphere", "R": "2"}, "R"),
        ({"family": "sphere", "n_dirs": "12.5"}, "n_dirs"),
        ({"family": "sphere", "n_dirs": "32"}, "n_dirs"),
        ({"family": "sphere", "h": "nan"}, "h"),
        ({"family": "sphere", "p": "1,1,1"}, "p"),
        ({"family": "sphere", "p": "a,b"}, "p"),
        ({"family": "torus", "R": "1", "r": "2"}, "family"),
    ],
)
def test_invalid_values_name_key(values, key):
    with pytest.raises(ConfigError) as e:
        load(None, values)
    assert e.value.key == key


def test_malformed_file(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("family sphere\n")
    with pytest.raises(ConfigError):
        read_file(str(f))
    with pytest.raises(ConfigError):
        read_file(str(tmp_path / "missing.cfg"))


def test_override_syntax():
    assert parse_overrides(["--a=1", "--p=0,0,1"]) == {"a": "1", "p": "0,0,1"}
    with pytest.raises(ConfigError):
        parse_overrides(["--a"])
