import json
import math

import numpy as np

from cutlab.cutlocus import sample_cut_locus
from cutlab.geodesic_engine import shoot
from cutlab.manifold import catalog
from cutlab.plotting import atlas_svg, break_seams, coords, geodesic_svg


def test_svg_deterministic_with_config_comment(tmp_path):
    s = catalog()["flat_torus"]
    samples = sample_cut_locus(s, [0.2, 0.3], 64)
    cfg = {"family": "flat_torus", "seed": 0}
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    atlas_svg(s, [0.2, 0.3], samples, str(a), cfg)
    atlas_svg(s, [0.2, 0.3], samples, str(b), cfg)
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert text.splitlines()[1] == "<!-- cutlab config: " + json.dumps(cfg, sort_keys=True) + " -->"
    assert "<dc:date>" not in text


def test_geodesic_svg_sphere(tmp_path):
    s = catalog()["sphere"]
    g = shoot(s, [0, 0, 1], 0.3, 5.0)
    path = tmp_path / "g.svg"
    geodesic_svg(s, g, str(path), {"family": "sphere"}, conjugate_time=math.pi)
    assert path.read_text().lstrip().startswith("<?xml")


def test_sphere_coords_longitude_colatitude():
    s = catalog()["sphere"]
    xy = coords(s, np.array([[0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]))
    np.testing.assert_allclose(xy[0], [math.pi / 2, math.pi / 2], atol=1e-12)
    assert xy[1, 1] == math.pi


def test_break_seams_inserts_gap():
    s = catalog()["flat_torus"]
    xy = break_seams(s, np.array([[0.9, 0.5], [0.05, 0.5], [0.1, 0.5]]))
    assert np.isnan(xy).any(axis=1).sum() == 1
