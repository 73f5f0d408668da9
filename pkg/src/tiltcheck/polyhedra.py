"""Polyhedra with signed coordinates: linear programming, vertices and rays.

A :class:`SignedPolyhedron` is ``{x : A x = b}`` where each coordinate is
tagged free, nonnegative or fixed at zero.  Linear programs are solved with
a dense two-phase simplex method using Bland's rule, so results are
deterministic and free of cycling.  Vertex enumeration goes through
candidate supports, which is exponential but exact for small instances.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import canonical_basis, orthonormal_range, rank, rank_and_nullspace

__all__ = [
    "FREE", "NONNEG", "ZERO", "SignedPolyhedron", "LPResult", "VertexSet",
    "FaceResult", "BudgetExceeded", "solve_lp", "solve_lp_general",
    "enumerate_vertices", "cone_extreme_rays", "cone_generators",
    "argmax_face_vertices", "minkowski_contains",
]

_log = logging.getLogger(__name__)

FREE, NONNEG, ZERO = "free", "nonneg", "zero"
MAX_SIGNED_COORDS = 24


class BudgetExceeded(RuntimeError):
    """An enumeration would need more subsets than allowed."""

    def __init__(self, what: str, needed: int, cap: int):
        super().__init__(f"{what}: {needed} subsets exceed the cap of {cap}")
        self.needed = needed
        self.cap = cap


@dataclass(frozen=True, eq=False)
class SignedPolyhedron:
    """The set ``{x : A x = b, x_i >= 0 (nonneg i), x_i = 0 (zero i)}``."""

    A: np.ndarray
    b: np.ndarray
    signs: tuple

    def __post_init__(self):
        signs = tuple(self.signs)
        A = np.asarray(self.A, float)
        if A.ndim == 1:
            A = A.reshape(0, len(signs)) if A.size == 0 else A[None, :]
        b = np.asarray(self.b, float).reshape(-1)
        if A.shape != (b.size, len(signs)):
            raise ValueError(f"inconsistent shapes: A {A.shape}, b {b.shape}, {len(signs)} signs")
        if any(s not in (FREE, NONNEG, ZERO) for s in signs):
            raise ValueError("sign tags must be free, nonneg or zero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "signs", signs)

    @property
    def dim(self) -> int:
        return len(self.signs)

    def indices(self, tag: str) -> list[int]:
        return [i for i, s in enumerate(self.signs) if s == tag]

    def cone(self) -> "SignedPolyhedron":
        """The recession cone (same system with ``b = 0``)."""
        return SignedPolyhedron(self.A, np.zeros_like(self.b), self.signs)

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, float)
        scale = 1.0 + np.abs(x).max(initial=0.0)
        if self.A.shape[0] and np.abs(self.A @ x - self.b).max() > tol * (scale + np.abs(self.b).max()):
            return False
        for i, s in enumerate(self.signs):
            if s == NONNEG and x[i] < -tol * scale:
                return False
            if s == ZERO and abs(x[i]) > tol * scale:
                return False
        return True


@dataclass
class LPResult:
    """Outcome of a linear program.

    ``basis`` lists the basic columns of the internal standard form.  When
    the status is ``unbounded`` the attribute ``ray`` holds a recession
    direction along which the objective improves without bound.
    """

    status: str
    value: float = math.nan
    x: np.ndarray | None = None
    basis: tuple = ()
    ray: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class VertexSet:
    vertices: list = field(default_factory=list)
    rays: list = field(default_factory=list)
    lineality: np.ndarray | None = None
    supports: list = field(default_factory=list)

    @property
    def bounded(self) -> bool:
        return not self.rays and (self.lineality is None or self.lineality.shape[1] == 0)

    def as_array(self) -> np.ndarray:
        if not self.vertices:
            return np.zeros((0, 0))
        return np.array(self.vertices)


# ---------------------------------------------------------------------------
# simplex


def _pivot(T, r, c):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    nz = np.nonzero(col)[0]
    if nz.size:
        T[nz] -= np.outer(col[nz], T[r])
    T[:, c] = 0.0
    T[r, c] = 1.0


def _run(T, basis, ncols, pivot_tol, opt_tol, max_iter):
    """Bland-rule pivoting on tableau ``T`` (last row = reduced costs).

    Returns ``(status, entering column or None, iterations)``.
    """
    m = len(basis)
    it = 0
    while True:
        d = T[-1, :ncols]
        cand = np.nonzero(d < -opt_tol)[0]
        if cand.size == 0:
            return "optimal", None, it
        j = int(cand[0])
        col = T[:m, j]
        rows = np.nonzero(col > pivot_tol)[0]
        if rows.size == 0:
            return "unbounded", j, it
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tie = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
        r = int(min(tie, key=lambda i: basis[i]))
        _pivot(T, r, j)
        basis[r] = j
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration limit reached")


def _simplex_standard(A, b, c, pivot_tol=1e-11, feas_tol=1e-9, max_iter=100000):
    """Minimize ``c x`` subject to ``A x = b, x >= 0``."""
    m, N = A.shape
    A = A.astype(float).copy()
    b = b.astype(float).copy()
    scale = np.maximum(np.abs(A).max(axis=1, initial=0.0), np.abs(b))
    scale[scale == 0] = 1.0
    A /= scale[:, None]
    b /= scale
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = A
    T[:m, N:N + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :N] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(N, N + m))
    _, _, it1 = _run(T, basis, N + m, pivot_tol, 1e-12, max_iter)
    if -T[-1, -1] > feas_tol * (1.0 + np.abs(b).max(initial=0.0)) * max(m, 1):
        return "infeasible", None, None, None, it1

    # drive artificial variables out of the basis, dropping redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= N:
            row = T[i, :N]
            j = int(np.argmax(np.abs(row))) if N else 0
            if N and abs(row[j]) > pivot_tol:
                _pivot(T, i, j)
                basis[i] = j
                keep.append(i)
        else:
            keep.append(i)
    T = np.vstack([T[keep][:, list(range(N)) + [N + m]], np.zeros((1, N + 1))])
    basis = [basis[i] for i in keep]
    m = len(basis)

    T[-1, :N] = c
    T[-1, -1] = 0.0
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    opt_tol = 1e-10 * (1.0 + np.abs(c).max(initial=0.0))
    status, enter, it2 = _run(T, basis, N, pivot_tol, opt_tol, max_iter)
    x = np.zeros(N)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    x[x < 0] = 0.0
    if status == "unbounded":
        ray = np.zeros(N)
        ray[enter] = 1.0
        for i, j in enumerate(basis):
            ray[j] = -T[i, enter]
        return "unbounded", x, tuple(basis), ray, it1 + it2
    return "optimal", x, tuple(basis), None, it1 + it2


def solve_lp(objective, P: SignedPolyhedron, sense: str = "max",
             pivot_tol: float = 1e-11, feas_tol: float = 1e-9) -> LPResult:
    """Optimize a linear objective over a signed polyhedron."""
    c = np.asarray(objective, float).reshape(-1)
    if c.size != P.dim:
        raise ValueError("objective length does not match the polyhedron")
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    cols = []  # (coordinate, sign) for each standard-form column
    for j, s in enumerate(P.signs):
        if s == NONNEG:
            cols.append((j, 1.0))
        elif s == FREE:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    m = P.A.shape[0]
    As = np.zeros((m, len(cols)))
    cs = np.zeros(len(cols))
    sgn = 1.0 if sense == "min" else -1.0
    for k, (j, s) in enumerate(cols):
        As[:, k] = s * P.A[:, j]
        cs[k] = sgn * s * c[j]

    def lift(y):
        out = np.zeros(P.dim)
        for k, (j, s) in enumerate(cols):
            out[j] += s * y[k]
        return out

    if not cols:
        x = np.zeros(P.dim)
        if m and np.abs(P.b).max() > feas_tol:
            return LPResult("infeasible")
        return LPResult("optimal", 0.0, x)
    status, y, basis, ray, it = _simplex_standard(As, P.b, cs, pivot_tol, feas_tol)
    if status == "infeasible":
        return LPResult("infeasible", iterations=it)
    x = lift(y)
    if status == "unbounded":
        r = lift(ray)
        nrm = np.linalg.norm(r)
        return LPResult("unbounded", math.inf if sense == "max" else -math.inf, x,
                        basis, r / nrm if nrm > 0 else r, it)
    return LPResult("optimal", float(c @ x), x, basis, None, it)


def solve_lp_general(objective, A_eq=None, b_eq=None, A_ub=None, b_ub=None,
                     signs=None, sense: str = "max", **kw) -> LPResult:
    """LP with ``A_eq x = b_eq`` and ``A_ub x <= b_ub`` (slacks added internally).

    ``signs`` tags the original variables (default all free).
    """
    c = np.asarray(objective, float).reshape(-1)
    n = c.size
    signs = tuple(signs) if signs is not None else (FREE,) * n
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float)).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).reshape(-1)
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float)).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).reshape(-1)
    k = A_ub.shape[0]
    A = np.block([[A_eq, np.zeros((A_eq.shape[0], k))], [A_ub, np.eye(k)]])
    b = np.concatenate([b_eq, b_ub])
    P = SignedPolyhedron(A, b, signs + (NONNEG,) * k)
    res = solve_lp(np.concatenate([c, np.zeros(k)]), P, sense, **kw)
    if res.x is not None:
        res.x = res.x[:n]
    if res.ray is not None:
        res.ray = res.ray[:n]
    return res


# ---------------------------------------------------------------------------
# cones


def _cone_core(N0, R, tol):
    """Extreme rays and lineality of ``{N0 mu : R mu >= 0}``.

    ``N0`` is an orthonormal basis of the ambient subspace; ``R`` holds the
    sign rows in the ``mu`` coordinates.
    """
    d, p = N0.shape
    if p == 0:
        return [], np.zeros((d, 0))
    if R.shape[0] == 0:
        return [], canonical_basis(N0)
    rR, NR = rank_and_nullspace(R, ncols=p)
    L = canonical_basis(N0 @ NR) if NR.shape[1] else np.zeros((d, 0))
    rays = []
    if rR == 0:
        return rays, L
    Q = orthonormal_range(R.T)
    Rp = R @ Q
    k = Rp.shape[0]
    for S in itertools.combinations(range(k), rR - 1):
        if rR > 1:
            rs, nu = rank_and_nullspace(Rp[list(S)], ncols=rR)
            if rs != rR - 1:
                continue
            nu = nu[:, 0]
        else:
            nu = np.ones(1)
        for sgn in (1.0, -1.0):
            y = Rp @ (sgn * nu)
            ymax = np.abs(y).max()
            if y.min() >= -tol * ymax and y.max() > tol:
                ray = N0 @ (Q @ (sgn * nu))
                ray /= np.linalg.norm(ray)
                ray[np.abs(ray) < 1e-15] = 0.0
                if not any(np.linalg.norm(ray - r0) <= 1e-8 for r0 in rays):
                    rays.append(ray)
                break
    rays.sort(key=lambda r: tuple(r))
    return rays, L


def cone_generators(A_eq, A_le, n: int, tol: float = 1e-9):
    """Extreme rays and lineality basis of ``{v : A_eq v = 0, A_le v <= 0}``."""
    A_eq = np.asarray(A_eq, float).reshape(-1, n)
    A_le = np.asarray(A_le, float).reshape(-1, n)
    if A_le.shape[0] > MAX_SIGNED_COORDS:
        raise BudgetExceeded("cone facets", A_le.shape[0], MAX_SIGNED_COORDS)
    _, N0 = rank_and_nullspace(A_eq, ncols=n)
    return _cone_core(N0, -A_le @ N0, tol)


def cone_extreme_rays(C: SignedPolyhedron, tol: float = 1e-9):
    """Unit extreme rays and an orthonormal lineality basis of a signed cone."""
    if np.abs(C.b).max(initial=0.0) != 0.0:
        raise ValueError("cone_extreme_rays needs a homogeneous system")
    nonneg = C.indices(NONNEG)
    if len(nonneg) > MAX_SIGNED_COORDS:
        raise BudgetExceeded("cone facets", len(nonneg), MAX_SIGNED_COORDS)
    rows = [C.A] + [np.eye(C.dim)[j][None, :] for j in C.indices(ZERO)]
    _, N0 = rank_and_nullspace(np.vstack(rows), ncols=C.dim)
    return _cone_core(N0, N0[nonneg], tol)


# ---------------------------------------------------------------------------
# vertices


def _dedupe_insert(points, x, tol):
    for p in points:
        if np.linalg.norm(p - x) <= tol * (1.0 + np.linalg.norm(x)):
            return False
    points.append(x)
    return True


def enumerate_vertices(P: SignedPolyhedron, max_support: int | None = None,
                       feas_tol: float = 1e-9, dedupe_tol: float = 1e-8,
                       subset_cap: int = 1 << 24) -> VertexSet:
    """Vertices, extreme recession rays and lineality of ``P``.

    When ``P`` has a lineality space ``L`` the returned vertices are those of
    ``P`` intersected with the orthogonal complement of ``L``, so that
    ``P = conv(vertices) + cone(rays) + span(L)``.
    """
    nonneg = P.indices(NONNEG)
    free = P.indices(FREE)
    if len(nonneg) > MAX_SIGNED_COORDS:
        raise BudgetExceeded("vertex supports", 2 ** len(nonneg), 2 ** MAX_SIGNED_COORDS)
    rays, L = cone_extreme_rays(P.cone(), feas_tol)
    A, b = P.A, P.b
    if L.shape[1]:
        A = np.vstack([A, L.T])
        b = np.concatenate([b, np.zeros(L.shape[1])])
    rA = rank(A) if A.shape[0] else 0
    rF = rank(A[:, free]) if free and A.shape[0] else 0
    cap = rA - rF if max_support is None else max_support
    cap = max(0, min(cap, len(nonneg)))
    needed = sum(math.comb(len(nonneg), s) for s in range(cap + 1))
    if needed > subset_cap:
        raise BudgetExceeded("vertex supports", needed, subset_cap)

    bscale = 1.0 + np.abs(b).max(initial=0.0)
    vertices, supports = [], []
    if rF < len(free):
        # free columns dependent even after removing the lineality: no vertex
        _log.debug("free columns are dependent; polyhedron has no vertices")
    else:
        for size in range(cap + 1):
            for S in itertools.combinations(nonneg, size):
                cols = free + list(S)
                if not cols:
                    if np.abs(b).max(initial=0.0) <= feas_tol * bscale:
                        x = np.zeros(P.dim)
                        if _dedupe_insert(vertices, x, dedupe_tol):
                            supports.append(())
                    continue
                sub = A[:, cols]
                if rank(sub) < len(cols):
                    continue
                y = np.linalg.lstsq(sub, b, rcond=None)[0]
                if np.abs(sub @ y - b).max(initial=0.0) > feas_tol * bscale:
                    continue
                ys = y[len(free):]
                yscale = 1.0 + np.abs(y).max(initial=0.0)
                if ys.size and ys.min() < -feas_tol * yscale:
                    continue
                x = np.zeros(P.dim)
                x[cols] = y
                x[[j for j in S if x[j] < 0]] = 0.0
                x[np.abs(x) < 1e-15] = 0.0
                if _dedupe_insert(vertices, x, dedupe_tol):
                    supports.append(tuple(S))
    order = sorted(range(len(vertices)), key=lambda k: tuple(vertices[k]))
    return VertexSet([vertices[k] for k in order], rays, L, [supports[k] for k in order])


@dataclass
class FaceResult:
    """Optimal face of an LP: its vertices, value and boundedness.

    ``bounded`` is false when the LP is unbounded or the face contains a
    nonzero recession direction.
    """

    status: str
    value: float
    vertices: list
    rays: list
    lineality: np.ndarray | None
    bounded: bool
    lp: LPResult


def argmax_face_vertices(objective, P: SignedPolyhedron, vs: VertexSet | None = None,
                         tol: float = 1e-8) -> FaceResult:
    """Vertices of ``argmax {objective . x : x in P}``.

    ``vs`` may pass a precomputed vertex set of ``P``.
    """
    c = np.asarray(objective, float)
    lp = solve_lp(c, P, "max")
    if lp.status == "infeasible":
        raise ValueError("argmax over an empty polyhedron")
    if vs is None:
        vs = enumerate_vertices(P)
    if lp.status == "unbounded":
        return FaceResult("unbounded", math.inf, [], [], None, False, lp)
    vals = [float(c @ v) for v in vs.vertices]
    best = max(vals + [lp.value])
    cut = best - tol * (1.0 + abs(best))
    verts = [v for v, f in zip(vs.vertices, vals) if f >= cut]
    cscale = 1.0 + np.abs(c).max(initial=0.0)
    rays = [r for r in vs.rays if abs(c @ r) <= tol * cscale]
    L = vs.lineality if vs.lineality is not None else np.zeros((P.dim, 0))
    bounded = not rays and L.shape[1] == 0
    return FaceResult("optimal", best, verts, rays, L, bounded, lp)


def minkowski_contains(vs: VertexSet, x, tol: float = 1e-7) -> bool:
    """Whether ``x`` lies in ``conv(vertices) + cone(rays) + span(lineality)``."""
    x = np.asarray(x, float)
    d = x.size
    V = np.array(vs.vertices).reshape(-1, d).T
    R = np.array(vs.rays).reshape(-1, d).T
    L = vs.lineality if vs.lineality is not None else np.zeros((d, 0))
    nv, nr, nl = V.shape[1], R.shape[1], L.shape[1]
    if nv == 0:
        return False
    A = np.vstack([np.hstack([V, R, L]),
                   np.concatenate([np.ones(nv), np.zeros(nr + nl)])[None, :]])
    b = np.concatenate([x, [1.0]])
    signs = (NONNEG,) * (nv + nr) + (FREE,) * nl
    res = solve_lp(np.zeros(nv + nr + nl), SignedPolyhedron(A, b, signs), "max", feas_tol=tol)
    return res.status == "optimal"
