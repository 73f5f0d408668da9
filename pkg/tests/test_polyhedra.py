import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tiltcheck import corpus
from tiltcheck.linalg import rank
from tiltcheck.polyhedra import (FREE, NONNEG, ZERO, BudgetExceeded, SignedPolyhedron,
                                 argmax_face_vertices, cone_generators, enumerate_vertices,
                                 minkowski_contains, solve_lp, solve_lp_general)

from conftest import build, sorted_rows

EX82_LAMBDA = SignedPolyhedron([[1, 1, -1]], [1], (NONNEG,) * 3)


def test_lp_on_ex83_segment():
    P = SignedPolyhedron([[1, 1]], [1], (NONNEG, NONNEG))
    res = solve_lp([1, 0], P)
    assert res.optimal and res.value == 1 and np.allclose(res.x, [1, 0])


def test_lp_infeasible():
    assert solve_lp([0], SignedPolyhedron([[1]], [-1], (NONNEG,))).status == "infeasible"


def test_lp_ex82_curvature_direction():
    res = solve_lp([-1, 0, -1], EX82_LAMBDA)
    assert res.optimal and res.value == 0 and np.allclose(res.x, [0, 1, 0])


def test_lp_unbounded_has_ray():
    res = solve_lp([0, 0, 1], EX82_LAMBDA)
    assert res.status == "unbounded"
    assert np.allclose(EX82_LAMBDA.A @ res.ray, 0) and res.ray.min() >= 0 and res.ray[2] > 0


def test_lp_general_inequalities():
    res = solve_lp_general([1, 1], A_ub=[[1, 0], [0, 1], [-1, -1]], b_ub=[1, 2, 0], sense="max")
    assert res.optimal and np.isclose(res.value, 3)


def test_bland_determinism():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 6))
    P = SignedPolyhedron(A, A @ rng.uniform(0, 1, 6), (NONNEG,) * 6)
    c = rng.normal(size=6)
    runs = [solve_lp(c, P) for _ in range(3)]
    assert len({r.basis for r in runs}) == 1
    assert len({r.value for r in runs}) == 1


def test_ex81_vertices(setup):
    s = setup("ex81")
    vs = s.ms.vertex_set
    assert sorted_rows(vs.vertices) == sorted_rows([[0, 0.25, 0.375, 0.375], [0.375, 0.625, 0, 0]])
    assert not vs.rays


def test_ex82_vertices_and_ray():
    vs = enumerate_vertices(EX82_LAMBDA)
    assert sorted_rows(vs.vertices) == sorted_rows([[1, 0, 0], [0, 1, 0]])
    assert vs.rays and all(r[2] > 0 for r in vs.rays)


def test_point_polyhedron():
    vs = enumerate_vertices(SignedPolyhedron([[1]], [2], (FREE,)))
    assert len(vs.vertices) == 1 and np.allclose(vs.vertices[0], [2]) and not vs.rays


def test_zero_coordinates_stay_zero():
    vs = enumerate_vertices(SignedPolyhedron([[1, 1]], [1], (NONNEG, ZERO)))
    assert sorted_rows(vs.vertices) == sorted_rows([[1, 0]])


def test_support_budget():
    P = SignedPolyhedron(np.ones((1, 12)), [1], (NONNEG,) * 12)
    with pytest.raises(BudgetExceeded):
        enumerate_vertices(P, subset_cap=5)


def test_argmax_face_ex82():
    v = np.array([0, 1, 1]) / np.sqrt(2)
    c = -np.array([v[1] ** 2, v[2] ** 2, v[1] ** 2 + v[2] ** 2])  # curvature of ex82 constraints
    face = argmax_face_vertices(c, EX82_LAMBDA)
    assert face.bounded and sorted_rows(face.vertices) == sorted_rows([[1, 0, 0], [0, 1, 0]])
    face = argmax_face_vertices([-1, 0, -1], EX82_LAMBDA)
    assert sorted_rows(face.vertices) == sorted_rows([[0, 1, 0]])


def test_argmax_constant_objective_is_whole_set():
    P = SignedPolyhedron([[1, 1, 1]], [1], (NONNEG,) * 3)
    face = argmax_face_vertices([0, 0, 0], P)
    assert sorted_rows(face.vertices) == sorted_rows(enumerate_vertices(P).vertices)


def test_cone_examples(setup):
    K = setup("ex82").K
    assert not K.rays and np.allclose(K.lineality, [[0, 0], [1, 0], [0, 1]])
    rays, L = cone_generators(np.zeros((0, 2)), np.eye(2), 2)
    assert sorted_rows(rays) == sorted_rows([[-1, 0], [0, -1]]) and L.shape[1] == 0
    K = setup("ex81").K
    assert K.trivial and not K.rays and K.lineality.shape[1] == 0


def test_vertices_satisfy_extreme_point_criterion():
    for name in corpus.names():
        s = build(corpus.load(name))
        J = s.pd.jacobian
        for lam, S in zip(s.ms.vertices, s.ms.i_plus):
            rows = list(s.act.equalities) + list(S)
            assert rank(J[rows]) == len(rows)
            assert np.allclose(J.T @ lam, -s.pd.grad_objective, atol=1e-8)


def _corpus_polyhedra():
    out = []
    for name in corpus.names():
        s = build(corpus.load(name))
        out.append((name, s.ms.polyhedron, s.ms.vertex_set))
    return out


@pytest.mark.parametrize("name, P, vs", _corpus_polyhedra(), ids=lambda x: x if isinstance(x, str) else "")
def test_lp_optimum_equals_vertex_maximum(name, P, vs):
    rng = np.random.default_rng(11)
    for _ in range(25):
        c = rng.normal(size=P.dim)
        res = solve_lp(c, P)
        best = max(float(c @ v) for v in vs.vertices)
        if vs.bounded:
            assert res.optimal and np.isclose(res.value, best, atol=1e-9)
        elif res.optimal:
            assert np.isclose(res.value, best, atol=1e-9)
        else:
            assert any(c @ r > 0 for r in vs.rays)


@st.composite
def small_polyhedra(draw):
    seed = draw(st.integers(0, 2 ** 31 - 1))
    rng = np.random.default_rng(seed)
    n = draw(st.integers(2, 5))
    m = draw(st.integers(1, n - 1))
    signs = tuple(draw(st.sampled_from([NONNEG, NONNEG, FREE])) for _ in range(n))
    A = np.round(rng.normal(size=(m, n)), 2)
    x0 = np.where(np.array(signs) == NONNEG, rng.uniform(0, 1, n), rng.normal(size=n))
    return SignedPolyhedron(A, A @ x0, signs), rng


@settings(max_examples=20)
@given(small_polyhedra())
def test_minkowski_reconstruction(data):
    P, rng = data
    vs = enumerate_vertices(P)
    assert vs.vertices
    N = np.linalg.svd(P.A)[2][P.A.shape[0]:].T  # kernel of A
    found = 0
    for _ in range(200):
        c = rng.normal(size=P.dim)
        res = solve_lp(c, P)
        if res.optimal:
            x = res.x
        else:
            x = res.x + rng.uniform(0, 3) * res.ray
        # wiggle inside the polyhedron along kernel directions
        y = x + N @ rng.normal(size=N.shape[1]) * 0.1 if N.size else x
        if not P.contains(y):
            y = x
        assert P.contains(y)
        assert minkowski_contains(vs, y, 1e-7)
        found += 1
        if found >= 10:
            break
