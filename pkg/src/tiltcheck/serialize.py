"""Conversion of report contents to JSON-safe values.

Infinite and NaN floats become ``null``; arrays become nested lists.
Constraint indices are converted to 1-based labels by the callers.
"""

from __future__ import annotations

import json
import math

import numpy as np

__all__ = ["jsonable", "dumps", "labels"]


def _num(x):
    x = float(x)
    if not math.isfinite(x):
        return None
    return 0.0 if x == 0.0 else x


def jsonable(obj):
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n"


def labels(indices) -> list:
    """1-based constraint labels for 0-based indices."""
    return [int(i) + 1 for i in indices]
