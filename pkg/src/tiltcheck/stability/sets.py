"""Active sets, multiplier polyhedra, critical cones and directional multipliers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..config import AnalysisConfig
from ..expr import PointData
from ..linalg import canonical_basis, rank
from ..polyhedra import (FREE, NONNEG, ZERO, SignedPolyhedron, VertexSet,
                         argmax_face_vertices, cone_generators, enumerate_vertices,
                         solve_lp, solve_lp_general)
from .sampling import sphere_points

__all__ = [
    "ActiveSet", "MultiplierSet", "CriticalCone", "DirectionalMultipliers",
    "LambdaBarE", "NotCritical", "active_set", "multiplier_set", "critical_cone",
    "in_linearized_cone", "i_plus_union", "strict_complementary_direction",
    "directional_multipliers", "lambda_bar_E", "curvature",
]


class NotCritical(ValueError):
    """A direction handed to a directional computation is not critical."""


@dataclass(frozen=True)
class ActiveSet:
    """Index bookkeeping at a point; indices are 0-based global constraint indices."""

    n_eq: int
    l: int
    active: tuple
    eq_violations: tuple
    ineq_violations: tuple

    @property
    def feasible(self) -> bool:
        return not self.eq_violations and not self.ineq_violations

    @property
    def equalities(self) -> tuple:
        return tuple(range(self.n_eq))

    @property
    def working(self) -> tuple:
        """Equalities followed by the active inequalities."""
        return self.equalities + self.active

    @property
    def inactive(self) -> tuple:
        return tuple(i for i in range(self.n_eq, self.l) if i not in self.active)


def active_set(pd: PointData, active_tol: float = 1e-8) -> ActiveSet:
    if not active_tol > 0:
        raise ValueError("active_tol must be positive")
    q = pd.q
    ne = pd.n_eq
    active = tuple(i for i in range(ne, q.size) if abs(q[i]) <= active_tol)
    eqv = tuple(i for i in range(ne) if abs(q[i]) > active_tol)
    inv = tuple(i for i in range(ne, q.size) if q[i] > active_tol)
    return ActiveSet(ne, q.size, active, eqv, inv)


def curvature(pd: PointData, v) -> np.ndarray:
    """The vector of second-order terms ``<v, Hess q_i v>``."""
    v = np.asarray(v, float)
    if pd.l == 0:
        return np.zeros(0)
    return np.einsum("j,ijk,k->i", v, pd.constraint_hessians, v)


@dataclass
class MultiplierSet:
    """The polyhedron of multipliers for a given ``x*`` and its vertices."""

    polyhedron: SignedPolyhedron
    vertex_set: VertexSet
    i_plus: list
    xstar: np.ndarray
    feasible: bool
    residual: float = 0.0

    @property
    def vertices(self) -> list:
        return self.vertex_set.vertices

    @property
    def rays(self) -> list:
        return self.vertex_set.rays

    @property
    def lineality(self) -> np.ndarray:
        return self.vertex_set.lineality

    @property
    def empty(self) -> bool:
        return not self.feasible

    @property
    def pointed(self) -> bool:
        L = self.vertex_set.lineality
        return L is None or L.shape[1] == 0


def strict_set(lam, act: ActiveSet, strict_tol: float) -> tuple:
    """Inequality indices with multiplier clearly positive."""
    lam = np.asarray(lam, float)
    scale = 1.0 + np.linalg.norm(lam)
    return tuple(i for i in act.active if lam[i] > strict_tol * scale)


def _multiplier_polyhedron(pd: PointData, xstar, act: ActiveSet) -> SignedPolyhedron:
    signs = []
    for i in range(pd.l):
        if i < pd.n_eq:
            signs.append(FREE)
        elif i in act.active:
            signs.append(NONNEG)
        else:
            signs.append(ZERO)
    return SignedPolyhedron(pd.jacobian.T.reshape(pd.n, pd.l), np.asarray(xstar, float), signs)


def multiplier_set(pd: PointData, xstar, act: ActiveSet,
                   cfg: AnalysisConfig | None = None) -> MultiplierSet:
    """Multipliers ``lambda`` in the normal cone with ``Jacobian^T lambda = x*``."""
    cfg = cfg or AnalysisConfig()
    xstar = np.asarray(xstar, float)
    P = _multiplier_polyhedron(pd, xstar, act)
    lp = solve_lp(np.zeros(pd.l), P, "max", cfg.lp_pivot_tol, cfg.feas_tol)
    if lp.status == "infeasible":
        return MultiplierSet(P, VertexSet(lineality=np.zeros((pd.l, 0))), [], xstar, False,
                             _nonneg_residual(pd, xstar, act))
    vs = enumerate_vertices(P, feas_tol=cfg.feas_tol, dedupe_tol=cfg.dedupe_tol)
    if not vs.vertices and lp.x is not None:
        vs.vertices.append(lp.x)
    iplus = [strict_set(v, act, cfg.strict_tol) for v in vs.vertices]
    return MultiplierSet(P, vs, iplus, xstar, True, 0.0)


def _nonneg_residual(pd, xstar, act):
    """Least residual of ``Jacobian^T lambda = x*`` over the sign cone."""
    from scipy.optimize import nnls

    cols, signs = [], []
    for i in act.working:
        cols.append(pd.jacobian[i])
        if i < pd.n_eq:
            cols.append(-pd.jacobian[i])
    if not cols:
        return float(np.linalg.norm(xstar))
    M = np.array(cols).T
    _, res = nnls(M, np.asarray(xstar, float))
    return float(res)


def in_linearized_cone(pd: PointData, act: ActiveSet, v, tol: float = 1e-9) -> bool:
    """Membership in the linearized tangent cone at the point."""
    v = np.asarray(v, float)
    J = pd.jacobian
    scale = tol * (1.0 + np.linalg.norm(v))
    for i in act.equalities:
        if abs(J[i] @ v) > scale * (1.0 + np.linalg.norm(J[i])):
            return False
    for i in act.active:
        if J[i] @ v > scale * (1.0 + np.linalg.norm(J[i])):
            return False
    return True


@dataclass
class CriticalCone:
    """Critical cone ``{v : A_eq v = 0, A_le v <= 0}`` with its generators."""

    n: int
    eq_index: tuple
    le_index: tuple
    A_eq: np.ndarray
    A_le: np.ndarray
    rays: list
    lineality: np.ndarray
    reference: np.ndarray | None
    consistent: bool = True

    @property
    def trivial(self) -> bool:
        return not self.rays and self.lineality.shape[1] == 0

    @property
    def is_subspace(self) -> bool:
        return not self.rays

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, float)
        s = tol * max(1.0, np.linalg.norm(v))
        for a in self.A_eq:
            if abs(a @ v) > s * (1.0 + np.linalg.norm(a)):
                return False
        for a in self.A_le:
            if a @ v > s * (1.0 + np.linalg.norm(a)):
                return False
        return True

    def span_basis(self) -> np.ndarray:
        gens = list(self.rays) + list(self.lineality.T)
        if not gens:
            return np.zeros((self.n, 0))
        return canonical_basis(np.array(gens).T)

    def generators(self) -> list:
        """Rays followed by both signs of each lineality vector."""
        out = list(self.rays)
        for w in self.lineality.T:
            out.extend([w.copy(), -w])
        return out


def _cone_from(pd, act, lam, cfg):
    ip = strict_set(lam, act, cfg.strict_tol)
    eq = act.equalities + ip
    le = tuple(i for i in act.active if i not in ip)
    A_eq = pd.jacobian[list(eq)].reshape(len(eq), pd.n)
    A_le = pd.jacobian[list(le)].reshape(len(le), pd.n)
    rays, L = cone_generators(A_eq, A_le, pd.n, cfg.cone_tol)
    return CriticalCone(pd.n, eq, le, A_eq, A_le, rays, L, np.asarray(lam, float))


def critical_cone(pd: PointData, xstar, ms: MultiplierSet, act: ActiveSet,
                  cfg: AnalysisConfig | None = None, probes: int = 100) -> CriticalCone:
    """Critical cone built from a multiplier, cross-checked against a second one.

    The representation uses the first vertex of the multiplier set; when a
    second vertex exists, membership of deterministic probe vectors is
    compared between the two representations and against the direct
    definition (linearized cone intersected with the orthogonal
    complement of ``x*``).
    """
    cfg = cfg or AnalysisConfig()
    if ms.empty:
        raise ValueError("critical cone needs a nonempty multiplier set")
    K = _cone_from(pd, act, ms.vertices[0], cfg)
    xstar = np.asarray(xstar, float)
    others = [_cone_from(pd, act, lam, cfg) for lam in ms.vertices[1:2]]
    consistent = True
    P = sphere_points(pd.n, probes)
    cand = list(P) + K.generators() + [g for o in others for g in o.generators()]
    for g in cand:
        direct = in_linearized_cone(pd, act, g, 1e-7) and abs(xstar @ g) <= 1e-7 * (1 + np.linalg.norm(xstar))
        mine = K.contains(g, 1e-7)
        if direct != mine or any(o.contains(g, 1e-7) != mine for o in others):
            consistent = False
            break
    K.consistent = consistent
    return K


def i_plus_union(ms: MultiplierSet, act: ActiveSet, cfg: AnalysisConfig | None = None):
    """Inequalities whose multiplier can be positive somewhere on the set.

    Returns the index tuple and, for each member, a maximizing multiplier.
    """
    cfg = cfg or AnalysisConfig()
    members, witnesses = [], {}
    if ms.empty:
        return (), witnesses
    l = ms.polyhedron.dim
    for i in act.active:
        c = np.zeros(l)
        c[i] = 1.0
        res = solve_lp(c, ms.polyhedron, "max", cfg.lp_pivot_tol, cfg.feas_tol)
        if res.status == "unbounded":
            members.append(i)
            witnesses[i] = res.x + res.ray
        elif res.status == "optimal" and res.value > cfg.strict_tol * (1.0 + np.linalg.norm(res.x)):
            members.append(i)
            witnesses[i] = res.x
    return tuple(members), witnesses


def strict_complementary_direction(pd: PointData, act: ActiveSet, ms: MultiplierSet,
                                   cfg: AnalysisConfig | None = None):
    """A multiplier with the largest strict set and a strictly feasible critical direction.

    Returns ``(lambda_tilde, v, t)``.  ``t > 0`` certifies that ``v``
    satisfies the inactive-part inequalities strictly; ``t`` is ``inf`` when
    there are no such inequalities.
    """
    cfg = cfg or AnalysisConfig()
    union, wit = i_plus_union(ms, act, cfg)
    if union:
        lam = np.mean([wit[i] for i in union], axis=0)
    elif ms.vertices:
        lam = ms.vertices[0].copy()
    else:
        lam = np.zeros(pd.l)
    eq = list(act.equalities) + list(union)
    le = [i for i in act.active if i not in union]
    n = pd.n
    if not le:
        return lam, np.zeros(n), math.inf
    J = pd.jacobian
    A_eq = np.hstack([J[eq].reshape(len(eq), n), np.zeros((len(eq), 1))])
    A_ub = np.vstack([np.hstack([J[le], np.ones((len(le), 1))]),
                      np.hstack([np.eye(n), np.zeros((n, 1))]),
                      np.hstack([-np.eye(n), np.zeros((n, 1))]),
                      np.concatenate([np.zeros(n), [1.0]])[None, :]])
    b_ub = np.concatenate([np.zeros(len(le)), np.ones(2 * n), [1.0]])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    res = solve_lp_general(c, A_eq, np.zeros(len(eq)), A_ub, b_ub, sense="max")
    if res.status != "optimal":
        return lam, np.zeros(n), 0.0
    return lam, res.x[:n], float(res.x[-1])


@dataclass
class DirectionalMultipliers:
    """Optimal face of the curvature LP over the multiplier set for direction ``v``."""

    v: np.ndarray
    value: float
    vertices: list
    bounded: bool
    singleton: bool
    lp_status: str

    @property
    def unbounded_lp(self) -> bool:
        return self.lp_status == "unbounded"


def directional_multipliers(pd: PointData, ms: MultiplierSet, v, K: CriticalCone | None = None,
                            cfg: AnalysisConfig | None = None) -> DirectionalMultipliers:
    cfg = cfg or AnalysisConfig()
    v = np.asarray(v, float)
    if K is not None and not K.contains(v, 1e-9):
        raise NotCritical("direction is not in the critical cone")
    c = curvature(pd, v)
    face = argmax_face_vertices(c, ms.polyhedron, ms.vertex_set, cfg.face_tol)
    single = face.status == "optimal" and len(face.vertices) == 1 and face.bounded
    return DirectionalMultipliers(v, face.value, face.vertices, face.bounded, single, face.status)


@dataclass
class LambdaBarE:
    """Extreme multipliers that are optimal in some nonzero critical direction.

    ``entries`` pairs each multiplier with the directions where it is
    optimal.  ``probes`` keeps every direction examined together with its
    optimal face; ``kind`` is ``"point"`` for directions that must be
    examined individually and ``"arc"`` for a representative of an open
    arc of directions with a constant optimal face.
    """

    entries: list = field(default_factory=list)
    probes: list = field(default_factory=list)
    exact: bool = True
    mode: str = "trivial"
    candidates: int = 0
    unbounded: list = field(default_factory=list)

    @property
    def multipliers(self) -> list:
        return [lam for lam, _ in self.entries]

    @property
    def empty(self) -> bool:
        return not self.entries


def _tie_roots(D: np.ndarray, scale: float) -> list:
    """Angles in [0, 2pi) where the quadratic form ``D`` vanishes on the unit circle."""
    p = 0.5 * (D[0, 0] + D[1, 1])
    q = 0.5 * (D[0, 0] - D[1, 1])
    r = D[0, 1]
    rho = math.hypot(q, r)
    if rho <= 1e-13 * scale or abs(p) > rho:
        return []
    phi = math.atan2(r, q)
    a = math.acos(max(-1.0, min(1.0, -p / rho)))
    out = []
    for base in (phi + a, phi - a):
        for k in (0, 1):
            out.append(((base / 2.0) + k * math.pi) % (2 * math.pi))
    return out


def _planar_angles(pd, ms, K, B):
    """Critical angles and arc representatives for a two-dimensional critical cone."""
    H = pd.constraint_hessians
    Q = np.einsum("ja,ijk,kb->iab", B, H, B) if pd.l else np.zeros((0, 2, 2))
    forms = [np.tensordot(lam, Q, axes=1) for lam in ms.vertices]
    dirs = list(ms.rays)
    if ms.lineality is not None:
        for w in ms.lineality.T:
            dirs.extend([w, -w])
    ray_forms = [np.tensordot(r, Q, axes=1) for r in dirs]
    scale = 1.0 + max((np.abs(F).max() for F in forms + ray_forms), default=0.0)
    roots = []
    for a in range(len(forms)):
        for b in range(a + 1, len(forms)):
            roots += _tie_roots(forms[a] - forms[b], scale)
    for F in ray_forms:
        roots += _tie_roots(F, scale)

    def angle(v):
        c = B.T @ v
        return math.atan2(c[1], c[0]) % (2 * math.pi)

    def unit(t):
        u = B @ np.array([math.cos(t), math.sin(t)])
        u[np.abs(u) < 1e-15] = 0.0
        return u

    two_pi = 2 * math.pi
    if K.lineality.shape[1] == 2:
        intervals = [(0.0, two_pi)]
    else:
        gens = sorted({round(angle(g), 15) for g in K.generators()})
        intervals = []
        for k, a in enumerate(gens):
            b = gens[(k + 1) % len(gens)]
            if b <= a:
                b += two_pi
            if K.contains(unit(0.5 * (a + b)), 1e-9):
                intervals.append((a, b))
    points, arcs = [], []
    for a, b in intervals:
        inner = sorted({(t if t >= a else t + two_pi) for t in roots
                        if a < (t if t >= a else t + two_pi) < b})
        cuts = [a] + inner + [b]
        full = (b - a) >= two_pi - 1e-15
        pts = cuts[:-1] if full else cuts
        points.extend(pts)
        arcs.extend(0.5 * (cuts[k] + cuts[k + 1]) for k in range(len(cuts) - 1))
    uniq = []
    for t in sorted(p % two_pi for p in points):
        if not any(abs(t - u) < 1e-12 or abs(abs(t - u) - two_pi) < 1e-12 for u in uniq):
            uniq.append(t)
    return [unit(t) for t in uniq], [unit(t) for t in arcs]


def _sampled_directions(K: CriticalCone, count: int) -> list:
    gens = K.generators()
    out = list(gens)
    for a in range(len(gens)):
        for b in range(a + 1, len(gens)):
            for w in (gens[a] + gens[b], gens[a] - gens[b]):
                nrm = np.linalg.norm(w)
                if nrm > 1e-9 and K.contains(w / nrm):
                    out.append(w / nrm)
    B = K.span_basis()
    s = B.shape[1]
    for u in sphere_points(s, count):
        w = B @ u
        if K.contains(w):
            out.append(w / np.linalg.norm(w))
    # conic combinations reach thin cones that sphere samples miss
    if gens:
        G = np.array(gens)
        for u in sphere_points(len(gens), count):
            w = np.abs(u) @ G
            nrm = np.linalg.norm(w)
            if nrm > 1e-9:
                out.append(w / nrm)
    return out


def lambda_bar_E(pd: PointData, ms: MultiplierSet, K: CriticalCone,
                 cfg: AnalysisConfig | None = None) -> LambdaBarE:
    """Collect the extreme multipliers optimal in some nonzero critical direction.

    For cones spanning at most two dimensions the candidate directions are
    provably exhaustive: on a line or ray there are finitely many
    directions up to scaling, and on a plane the optimal face can only
    change at angles where two vertex values tie or a recession direction
    changes sign, all of which are computed in closed form.  Otherwise the
    directions are sampled and the result is flagged as inexact (unless
    every vertex was already found).
    """
    cfg = cfg or AnalysisConfig()
    out = LambdaBarE()
    if ms.empty or K.trivial:
        out.mode = "trivial"
        return out
    B = K.span_basis()
    s = B.shape[1]
    probes = []
    if s == 1:
        out.mode = "line" if K.lineality.shape[1] else "ray"
        probes = [(g, "point") for g in K.generators()]
    elif s == 2:
        out.mode = "planar"
        pts, arcs = _planar_angles(pd, ms, K, B)
        probes = [(v, "point") for v in pts] + [(v, "arc") for v in arcs]
    else:
        out.mode = "sampled"
        probes = [(v, "point") for v in _sampled_directions(K, cfg.sphere_samples)]
    out.candidates = len(probes)
    found: list[list] = []
    for v, kind in probes:
        dm = directional_multipliers(pd, ms, v, None, cfg)
        out.probes.append((v, kind, dm))
        if dm.unbounded_lp:
            out.unbounded.append(v)
            continue
        for lam in dm.vertices:
            for entry in found:
                if np.linalg.norm(entry[0] - lam) <= cfg.dedupe_tol * (1 + np.linalg.norm(lam)):
                    entry[1].append(v)
                    break
            else:
                found.append([lam, [v]])
    found.sort(key=lambda e: tuple(e[0]))
    out.entries = [(lam, dirs) for lam, dirs in found]
    if out.mode == "sampled":
        out.exact = len(found) == len(ms.vertices) and ms.pointed
    return out
