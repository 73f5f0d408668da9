"""Small dense linear algebra: rank, nullspaces, eigenvalues, least squares.

All routines are deterministic.  Nullspace bases are canonicalized (reduced
row echelon form of the basis, then Gram-Schmidt) so that the same subspace
always yields the same basis, and coordinate subspaces yield unit vectors.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "singular_values", "rank", "rank_and_nullspace", "canonical_basis",
    "orthonormal_range", "sym_eig", "sym_eig_min", "min_singular_value",
    "solve_least_squares",
]

RANK_TOL = 1e-10


def singular_values(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, float))
    if A.size == 0:
        return np.zeros(0)
    return np.linalg.svd(A, compute_uv=False)


def _threshold(s: np.ndarray, tol: float) -> float:
    smax = s[0] if s.size and s[0] > 0 else 1.0
    return tol * smax


def rank(A, tol: float = RANK_TOL) -> int:
    s = singular_values(A)
    if s.size == 0:
        return 0
    return int(np.sum(s > _threshold(s, tol)))


def _rref(B: np.ndarray, tol: float) -> np.ndarray:
    """Reduced row echelon form with partial pivoting; zero rows dropped."""
    R = B.astype(float).copy()
    rows, cols = R.shape
    scale = max(np.abs(R).max(initial=0.0), 1.0)
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[p, c]) <= tol * scale:
            R[r:, c] = 0.0
            continue
        R[[r, p]] = R[[p, r]]
        R[r] /= R[r, c]
        for k in range(rows):
            if k != r and R[k, c] != 0.0:
                R[k] -= R[k, c] * R[r]
        R[r, c] = 1.0
        r += 1
    return R[:r]


def canonical_basis(V, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (as columns) of span of the columns of ``V``.

    The basis depends only on the subspace, not on the spanning set.
    """
    V = np.asarray(V, float)
    if V.ndim == 1:
        V = V[:, None]
    n = V.shape[0]
    if V.size == 0:
        return np.zeros((n, 0))
    R = _rref(V.T, tol)
    Q = np.zeros((n, 0))
    for row in R:
        w = row - Q @ (Q.T @ row)
        w -= Q @ (Q.T @ w)
        nrm = np.linalg.norm(w)
        if nrm > tol:
            Q = np.column_stack([Q, w / nrm])
    Q[np.abs(Q) < 1e-15] = 0.0
    return Q


def rank_and_nullspace(A, tol: float = RANK_TOL, ncols: int | None = None):
    """Numerical rank of ``A`` and an orthonormal basis of its kernel.

    ``ncols`` gives the column count when ``A`` has no rows.
    """
    A = np.asarray(A, float)
    if A.ndim == 1:
        A = A[None, :] if A.size else A.reshape(0, ncols or 0)
    n = A.shape[1] if A.size or ncols is None else ncols
    if A.shape[0] == 0 or n == 0:
        return 0, np.eye(n)
    U, s, Vt = np.linalg.svd(A)
    r = int(np.sum(s > _threshold(s, tol)))
    N = Vt[r:].T
    if N.shape[1] == 0:
        return r, np.zeros((n, 0))
    return r, canonical_basis(N)


def orthonormal_range(A, tol: float = RANK_TOL) -> np.ndarray:
    """Canonical orthonormal basis of the column space of ``A``."""
    A = np.atleast_2d(np.asarray(A, float))
    if A.size == 0:
        return np.zeros((A.shape[0], 0))
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > _threshold(s, tol)))
    return canonical_basis(U[:, :r]) if r else np.zeros((A.shape[0], 0))


def sym_eig(S, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigenvalues (ascending) and eigenvectors of a symmetric matrix.

    Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops
    below ``tol * ||S||_F``.
    """
    A = np.array(S, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    norm = np.linalg.norm(A)
    if norm == 0.0:
        return np.zeros(n), V
    target = tol * norm
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off < target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J = A[:, [p, q]] @ np.array([[c, s], [-s, c]])
                A[:, p], A[:, q] = J[:, 0], J[:, 1]
                J = np.array([[c, -s], [s, c]]) @ A[[p, q], :]
                A[p, :], A[q, :] = J[0], J[1]
                A[p, q] = A[q, p] = 0.0
                W = V[:, [p, q]] @ np.array([[c, s], [-s, c]])
                V[:, p], V[:, q] = W[:, 0], W[:, 1]
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def sym_eig_min(S):
    """Smallest eigenvalue of a symmetric matrix and a unit eigenvector.

    The eigenvector sign is fixed so that its largest-magnitude entry is
    positive.  An empty matrix gives ``(inf, empty)``.
    """
    S = np.asarray(S, float)
    if S.size == 0:
        return float("inf"), np.zeros(0)
    w, V = sym_eig(S)
    u = V[:, 0].copy()
    k = int(np.argmax(np.abs(u)))
    if u[k] < 0:
        u = -u
    return float(w[0]), u


def min_singular_value(A) -> float:
    """Smallest singular value of ``A`` (over min(rows, cols) values)."""
    s = singular_values(A)
    if s.size == 0:
        raise ValueError("empty matrix")
    return float(s[-1])


def solve_least_squares(A, b, tol: float = RANK_TOL):
    """Minimum-norm least-squares solution of ``A x = b``.

    Returns ``(x, residual_norm, unique)`` where ``unique`` means full
    column rank.
    """
    A = np.atleast_2d(np.asarray(A, float))
    b = np.asarray(b, float).reshape(-1)
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.zeros(n), 0.0, n == 0
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > _threshold(s, tol)))
    x = Vt[:r].T @ ((U[:, :r].T @ b) / s[:r])
    return x, float(np.linalg.norm(A @ x - b)), r == n
