import json
import math

import jsonschema
import numpy as np
import pytest

from cutlab import report


def test_clean_maps_non_finite_to_null():
    out = report.clean({"a": np.float64(math.inf), "b": [np.nan, np.int64(3)], "c": np.array([1.5, -np.inf]), "d": np.bool_(True)})
    assert out == {"a": None, "b": [None, 3], "c": [1.5, None], "d": True}


def test_dumps_sorted_and_strict():
    text = report.dumps({"b": 1, "a": math.nan})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": None, "b": 1}


@pytest.mark.parametrize("kind", report.KINDS)
def test_schemas_are_valid(kind):
    s = report.schema(kind)
    jsonschema.Draft202012Validator.check_schema(s)
    assert s["properties"]["kind"]["const"] == kind


def test_document_rejects_bad_result():
    with pytest.raises(jsonschema.ValidationError):
        report.document("radius", {"family": "sphere"}, {"rad": "wide"})


def test_csv_round_trip(tmp_path):
    path = tmp_path / "x.csv"
    cfg = {"family": "sphere", "p": [0.0, 0.0, 1.0]}
    report.write_csv(str(path), ["t", "x"], [[0.0, 0.1], [1.0, 1 / 3]], cfg)
    head, names, data = report.read_csv(str(path))
    assert head == {"family": "sphere", "p": "0.0,0.0,1.0"}
    assert names == ["t", "x"]
    # repr keeps every bit of the doubles
    assert data[1, 1] == 1 / 3
    assert path.read_text().splitlines()[0] == "# family = sphere"
