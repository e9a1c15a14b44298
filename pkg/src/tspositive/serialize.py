"""JSON helpers shared by the report types."""

from __future__ import annotations

import json
import math

import numpy as np


def ext_real(x):
    """Extended reals as JSON: finite floats stay numbers, infinities become strings."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def parse_ext_real(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def complex_list(z):
    return [[float(c.real), float(c.imag)] for c in np.asarray(z, dtype=complex)]


def matrix_list(M):
    return [[float(x) for x in row] for row in np.atleast_2d(np.asarray(M, dtype=float))]


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float):
        return ext_real(obj)
    return obj


def dumps(obj, indent=2):
    # repr of a double is the shortest string that round-trips, never more than
    # 17 significant digits
    return json.dumps(_plain(obj), indent=indent, allow_nan=False, ensure_ascii=False)
