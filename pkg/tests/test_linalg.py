import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tiltcheck.linalg import (canonical_basis, min_singular_value, rank, rank_and_nullspace,
                              solve_least_squares, sym_eig, sym_eig_min)

EX81_JACOBIAN = [[1, 0, -1], [-1, 0, -1], [0, 1, -1], [0, -1, -1]]


def test_ex81_jacobian_full_rank():
    r, N = rank_and_nullspace(EX81_JACOBIAN)
    assert r == 3 and N.shape == (3, 0)


def test_identity():
    r, N = rank_and_nullspace(np.eye(3))
    assert r == 3 and N.shape[1] == 0


def test_ex83_jacobian_nullspace():
    r, N = rank_and_nullspace([[1, 0, 0], [1, 0, 0]])
    assert r == 1
    assert np.allclose(N, [[0, 0], [1, 0], [0, 1]])


def test_zero_matrix_rank_zero():
    r, N = rank_and_nullspace(np.zeros((2, 3)))
    assert r == 0 and N.shape == (3, 3)


def test_sym_eig_min_examples():
    assert sym_eig_min(np.eye(2))[0] == 1.0
    mu, u = sym_eig_min(np.diag([0.0, -1.0]))
    assert mu == -1.0 and np.allclose(u, [0, 1])
    A = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])  # basis of {w : w1 = 0}
    S = A.T @ np.diag([0.0, 2.0 - 1.0, 2.0]) @ A
    assert np.isclose(sym_eig_min(S)[0], 1.0)


def test_min_singular_value_examples():
    assert np.isclose(min_singular_value(np.eye(2)), 1.0)
    eps = 1e-3
    assert abs(min_singular_value([[1, 0], [1, eps]]) / (eps / np.sqrt(2)) - 1) < 0.05
    assert np.isclose(min_singular_value([[1, 0, 0]]), 1.0)


def test_least_squares_examples():
    x, res, unique = solve_least_squares(np.eye(2), [1, 2])
    assert np.allclose(x, [1, 2]) and res == 0 and unique
    x, res, unique = solve_least_squares([[1, 0], [1, 0]], [1, 1])
    assert np.allclose(x, [1, 0]) and res < 1e-14 and not unique


def test_ex81_vertex_solve():
    # support {2,3,4} of the first extreme multiplier
    J = np.array(EX81_JACOBIAN, float)
    x, res, unique = solve_least_squares(J[[1, 2, 3]].T, [-0.25, 0, -1])
    assert unique and res < 1e-14
    assert np.allclose(x, [0.25, 0.375, 0.375])


def test_canonical_basis_is_independent_of_input_basis():
    V = np.array([[1.0, 1.0], [1.0, -1.0], [0.0, 0.0]])
    B1 = canonical_basis(V)
    B2 = canonical_basis(V @ np.array([[2.0, 1.0], [0.5, -3.0]]))
    assert np.allclose(B1, B2)


matrices = st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2 ** 31 - 1),
                     st.integers(0, 4))


def _random_matrix(m, n, seed, drop):
    rng = np.random.default_rng(seed)
    k = max(min(m, n) - drop, 0)
    return rng.normal(size=(m, k)) @ rng.normal(size=(k, n)) if k else np.zeros((m, n))


@settings(max_examples=100)
@given(matrices)
def test_nullspace_properties(shape):
    A = _random_matrix(*shape)
    r, N = rank_and_nullspace(A)
    smax = np.linalg.norm(A, 2)
    assert r + N.shape[1] == A.shape[1]
    assert np.abs(A @ N).max(initial=0.0) <= 1e-10 * max(smax, 1.0)
    assert np.allclose(N.T @ N, np.eye(N.shape[1]), atol=1e-10)
    assert r == rank(A)


@settings(max_examples=60)
@given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1))
def test_jacobi_against_rayleigh_quotients(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    S = M + M.T
    w, V = sym_eig(S)
    assert np.allclose(S @ V, V * w, atol=1e-8 * np.linalg.norm(S))
    mu, u = sym_eig_min(S)
    assert np.linalg.norm(S @ u - mu * u) <= 1e-8 * np.linalg.norm(S)
    P = rng.normal(size=(100, n))
    rq = np.einsum("ij,jk,ik->i", P, S, P) / np.einsum("ij,ij->i", P, P)
    assert np.all(mu <= rq + 1e-12)
    assert np.allclose(w, np.linalg.eigvalsh(S), atol=1e-10 * np.linalg.norm(S))


@settings(max_examples=60)
@given(matrices)
def test_min_singular_value_transpose(shape):
    A = _random_matrix(*shape)
    assert abs(min_singular_value(A) - min_singular_value(A.T)) <= 1e-9 * (1 + np.linalg.norm(A))
