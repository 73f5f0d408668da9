from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import settings

from tiltcheck import corpus
from tiltcheck.config import AnalysisConfig
from tiltcheck.expr import PointData, ProblemSpec, eval_point, parse_problem
from tiltcheck.stability.sets import (ActiveSet, CriticalCone, MultiplierSet, active_set,
                                      critical_cone, multiplier_set)

settings.register_profile("tiltcheck", deadline=None, print_blob=True)
settings.load_profile("tiltcheck")


@dataclass
class Setup:
    problem: ProblemSpec
    pd: PointData
    act: ActiveSet
    ms: MultiplierSet
    K: CriticalCone
    cfg: AnalysisConfig


def build(problem, cfg=None) -> Setup:
    cfg = cfg or AnalysisConfig()
    pd = eval_point(problem)
    act = active_set(pd, cfg.active_tol)
    ms = multiplier_set(pd, -pd.grad_objective, act, cfg)
    K = critical_cone(pd, -pd.grad_objective, ms, act, cfg) if not ms.empty else None
    return Setup(problem, pd, act, ms, K, cfg)


def problem_from(text: str, **params) -> ProblemSpec:
    return parse_problem(text, params or None)


@pytest.fixture
def setup():
    """Factory: ``setup("ex82", a=0.5)`` returns the evaluated corpus entry."""

    def make(name, **params):
        return build(corpus.load(name, params or None))

    return make


def sorted_rows(rows):
    return sorted(tuple(np.round(np.asarray(r, float), 12)) for r in rows)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
