"""CSV and JSON writers with an embedded configuration header.

JSON documents have the envelope ``{"kind", "config", "result"}``, are
serialized with sorted keys and map non-finite floats to ``null``; each
kind is validated against the schema shipped in ``cutlab/schemas``.
CSV files start with ``#``-prefixed ``key = value`` lines.
"""

import json
import math
import os
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

KINDS = ("geodesic", "cutlocus", "radii", "dichotomy", "characterize", "radius", "verify")


def clean(obj):
    """Plain JSON types: numpy scalars and arrays unwrapped, inf/nan to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj):
    return json.dumps(clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


@lru_cache(maxsize=None)
def schema(kind):
    text = resources.files("cutlab").joinpath("schemas", f"{kind}.json").read_text(encoding="utf-8")
    return json.loads(text)


def document(kind, config, result):
    doc = clean({"kind": kind, "config": config, "result": result})
    jsonschema.validate(doc, schema(kind))
    return doc


def write_json(path, kind, config, result):
    doc = document(kind, config, result)
    _write(path, dumps(doc))
    return doc


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def header_lines(config):
    out = []
    for k, v in config.items():
        v = clean(v)
        if isinstance(v, list):
            v = ",".join(repr(x) for x in v)
        out.append(f"# {k} = {v}")
    return out


def csv_text(columns, rows, config):
    lines = header_lines(config)
    lines.append(",".join(columns))
    for r in rows:
        lines.append(",".join(_cell(v) for v in r))
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows, config):
    _write(path, csv_text(columns, rows, config))


def read_csv(path):
    """(header dict, column names, float array) from a file written here."""
    header, names, rows = {}, None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                header[k.strip()] = v.strip()
            elif names is None:
                names = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
    return header, names, np.array(rows).reshape(len(rows), len(names or []))


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
