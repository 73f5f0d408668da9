import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tiltcheck import corpus
from tiltcheck.config import TiltProbeConfig
from tiltcheck.expr import eval_point, evaluate, format_problem, parse_expression, parse_problem
from tiltcheck.oracle import UNSTABLE, tilt_probe
from tiltcheck.stability.perturb import PerturbationError, perturb_problem, second_order_match

from conftest import build

V = np.array([0.0, 1.0, 0.0])


def _ex83(setup):
    s = setup("ex83")
    return s, perturb_problem(s.problem, s.pd, s.act, [0.0, 1.0], [0.0, 0.0, 1.0], V, s.cfg,
                              soscms_ok=True)


def test_construction_data(setup):
    s, pp = _ex83(setup)
    assert np.allclose(pp.z, [0, 1, 0]) and pp.alpha == 1.0
    assert np.isclose(pp.radius, 0.25)
    assert pp.i_plus == (1,) and pp.i_hat == (0, 1)
    assert pp.matches and not pp.warnings


def test_reproduces_the_simplified_perturbation(setup):
    s, pp = _ex83(setup)
    ref = parse_expression("x1 + x3^2 - (x1^2 + x2^2 + x3^2)^2", 3)
    X = np.random.default_rng(1).uniform(-0.2, 0.2, size=(200, 3))
    # inside the ball of radius r the path is a parabola and the formula is exact
    X = X[np.linalg.norm(X, axis=1) < pp.radius]
    assert np.allclose(evaluate(pp.problem.inequalities[0], X), evaluate(ref, X), atol=1e-12)
    assert np.allclose(evaluate(pp.problem.inequalities[1], X), X[:, 0])


def test_second_order_match(setup):
    s, pp = _ex83(setup)
    m = second_order_match(s.problem, pp.problem)
    assert m["max_error"] <= 1e-8


def test_emitted_file_is_not_tilt_stable(setup):
    s, pp = _ex83(setup)
    q = parse_problem(format_problem(pp.problem))
    assert tilt_probe(q, TiltProbeConfig(starts=32)).verdict == UNSTABLE


def test_precondition_failures(setup):
    s = setup("ex83")
    with pytest.raises(PerturbationError):
        perturb_problem(s.problem, s.pd, s.act, [1.0, 0.0], [0, 1.0, 0], V, s.cfg)
    with pytest.raises(PerturbationError):
        perturb_problem(s.problem, s.pd, s.act, [0.0, 1.0], [0, 0, 1.0], 2 * V, s.cfg)


def test_warning_without_soscms(setup):
    s = setup("ex83")
    pp = perturb_problem(s.problem, s.pd, s.act, [0.0, 1.0], [0, 0, 1.0], V, s.cfg)
    assert pp.warnings


@settings(max_examples=25)
@given(st.floats(0.1, 3.0), st.floats(-1.0, 1.0), st.floats(-2.0, 2.0))
def test_second_order_match_on_a_family(c, shift, curv):
    """A family in the shape of ex83 with varied data keeps the match invariant."""
    text = (f'dimension = 3\nobjective = "-{c}*x1 + 0.5*x2^2 + {shift}*x1*x2"\n'
            f'inequalities = ["x1 + x3^2 + {curv}*x1*x3", "x1"]\npoint = [0, 0, 0]\n')
    s = build(parse_problem(text))
    lam = next(v for v in s.ms.vertices if v[0] == 0.0)
    w = np.array([0.0, 0.0, 1.0])
    assert w @ s.pd.lagrangian_hessian(lam) @ w <= 1e-12
    pp = perturb_problem(s.problem, s.pd, s.act, lam, w, V, s.cfg)
    m = second_order_match(s.problem, pp.problem)
    assert m["max_error"] <= 1e-8
