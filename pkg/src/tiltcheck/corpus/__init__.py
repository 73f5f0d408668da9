"""Bundled example problems with their expected results."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from ..expr import ProblemSpec, parse_problem

__all__ = ["names", "text", "metadata", "load", "emit"]

_NAMES = ("ex81", "ex82", "ex82r", "ex83", "ex84")


def names() -> tuple:
    return _NAMES


def _check(name: str):
    if name not in _NAMES:
        raise KeyError(f"unknown corpus entry {name!r}; available: {', '.join(_NAMES)}")


def text(name: str) -> str:
    _check(name)
    return resources.files(__package__).joinpath(f"{name}.nlp").read_text(encoding="utf-8")


def metadata(name: str) -> dict:
    _check(name)
    return json.loads(resources.files(__package__).joinpath(f"{name}.json").read_text(encoding="utf-8"))


def load(name: str, overrides=None) -> ProblemSpec:
    return parse_problem(text(name), overrides)


def emit(name: str, directory) -> tuple:
    """Write ``<name>.nlp`` and ``<name>.json`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    nlp = d / f"{name}.nlp"
    meta = d / f"{name}.json"
    nlp.write_text(text(name), encoding="utf-8")
    meta.write_text(json.dumps(metadata(name), indent=2) + "\n", encoding="utf-8")
    return nlp, meta
