"""Constraint qualifications at the reference point.

LICQ, MFCQ and SOSCMS are pointwise and decided from derivative data.
CRCQ, MSCQ and BEPP involve a neighborhood of the point; they are checked
on deterministic samples, so a failure comes with a witness while a pass is
only evidence (status ``holdsSampled``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..config import AnalysisConfig
from ..expr import PointData, ProblemSpec
from ..linalg import orthonormal_range, rank, rank_and_nullspace
from ..polyhedra import (FREE, NONNEG, ZERO, BudgetExceeded, SignedPolyhedron,
                         cone_extreme_rays, cone_generators, enumerate_vertices,
                         solve_lp)
from ..solver import TiltedModel, penalty_descent, polish
from .sampling import ball_points, sphere_points
from .sets import ActiveSet, active_set, curvature

__all__ = [
    "HOLDS", "FAILS", "HOLDS_SAMPLED", "FAILS_WITH_WITNESS", "INCONCLUSIVE",
    "CQRecord", "CQReport", "Partition", "parse_partition", "cone_min_gain",
    "check_licq", "check_mfcq", "check_crcq_sampled", "check_mscq_sampled",
    "check_bepp_sampled", "check_soscms", "verify_mfcq_witness",
    "verify_soscms_witness", "project_feasible", "cq_suite",
]

HOLDS, FAILS = "holds", "fails"
HOLDS_SAMPLED, FAILS_WITH_WITNESS, INCONCLUSIVE = "holdsSampled", "failsWithWitness", "inconclusive"


@dataclass
class CQRecord:
    """Outcome of one qualification check.

    ``witness`` holds whatever certifies a failure (a multiplier, a
    direction, a sample point with index subset); ``modulus`` is a numerical
    estimate where the condition has one.
    """

    name: str
    status: str
    witness: dict = field(default_factory=dict)
    modulus: float | None = None
    certified: bool = False
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (HOLDS, HOLDS_SAMPLED)


@dataclass
class CQReport:
    licq: CQRecord
    mfcq: CQRecord
    crcq: CQRecord
    mscq: CQRecord
    bepp: CQRecord
    soscms: CQRecord

    def records(self) -> list:
        return [self.licq, self.mfcq, self.crcq, self.mscq, self.bepp, self.soscms]

    @property
    def equality_gradients_independent(self) -> bool:
        return bool(self.mfcq.details.get("equality_rank_full", True))

    @property
    def qualified(self) -> bool:
        """Whether some condition that makes the second-order theory apply is supported."""
        if self.mfcq.ok or self.soscms.ok:
            return True
        if self.crcq.ok and self.equality_gradients_independent:
            return True
        return self.mscq.ok and self.bepp.ok


@dataclass(frozen=True)
class Partition:
    """Split of the constraints into the parts whose multipliers must vanish.

    ``e1`` and ``i1`` are 0-based global constraint indices.  The remaining
    equalities and inequalities form the second part, which is treated as
    holding with equality.
    """

    e1: tuple
    i1: tuple

    @classmethod
    def default(cls, n_eq: int, l: int) -> "Partition":
        return cls(tuple(range(n_eq)), tuple(range(n_eq, l)))


def parse_partition(text: str, n_eq: int, l: int) -> Partition:
    """Parse ``"E1=1,2;I1=3"`` (1-based global constraint labels).

    A part that is not mentioned keeps all of its indices.
    """
    e1, i1 = tuple(range(n_eq)), tuple(range(n_eq, l))
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        key, sep, vals = chunk.partition("=")
        if not sep:
            raise ValueError(f"bad partition item {chunk!r}")
        key = key.strip().upper()
        idx = tuple(sorted({int(v) - 1 for v in vals.split(",") if v.strip()}))
        if key == "E1":
            if any(not 0 <= i < n_eq for i in idx):
                raise ValueError("E1 must list equality constraints")
            e1 = idx
        elif key == "I1":
            if any(not n_eq <= i < l for i in idx):
                raise ValueError("I1 must list inequality constraints")
            i1 = idx
        else:
            raise ValueError(f"unknown partition part {key!r}")
    return Partition(e1, i1)


# ---------------------------------------------------------------------------
# helpers


def cone_min_gain(M, nonneg) -> tuple:
    """Minimum of ``||M y||`` over unit ``y`` with ``y_j >= 0`` for flagged ``j``.

    The minimizer restricted to its support is an eigenvector of the Gram
    matrix on that support, so every face of the orthant part is scanned
    and sign-feasible eigenvectors are compared.  Returns ``(gain, y)``.
    """
    M = np.asarray(M, float)
    k = M.shape[1]
    nonneg = np.asarray(nonneg, bool).reshape(k)
    if k == 0:
        return math.inf, np.zeros(0)
    G = M.T @ M
    free = [j for j in range(k) if not nonneg[j]]
    signed = [j for j in range(k) if nonneg[j]]
    best, arg = math.inf, None
    for size in range(len(signed) + 1):
        for S in itertools.combinations(signed, size):
            cols = free + list(S)
            if not cols:
                continue
            w, V = np.linalg.eigh(G[np.ix_(cols, cols)])
            for val, vec in zip(w, V.T):
                for s in (1.0, -1.0):
                    y = s * vec
                    if S and y[len(free):].min() < -1e-12:
                        continue
                    g = math.sqrt(max(val, 0.0))
                    if g < best - 1e-15:
                        best = g
                        arg = np.zeros(k)
                        arg[cols] = y
                    break
    return best, arg


def _sign_patterns(idx, cap):
    if 2 ** len(idx) > cap:
        raise BudgetExceeded("sign patterns", 2 ** len(idx), cap)
    return list(itertools.product((1.0, -1.0), repeat=len(idx)))


def project_feasible(problem: ProblemSpec, Y, cfg: AnalysisConfig) -> tuple:
    """Nearby feasible points of a batch by penalty projection plus polish.

    Returns ``(X, ok)``.  A row that does not reach feasibility within
    ``cfg.oracle.feas_tol`` is flagged as failed.
    """
    Y = np.atleast_2d(np.asarray(Y, float))
    if problem.n_eq + problem.n_ineq == 0:
        return Y.copy(), np.ones(len(Y), bool)
    oc = cfg.oracle
    model = TiltedModel(problem, np.zeros_like(Y), weight=0.0, prox_weight=1.0, prox_centers=Y)
    X = penalty_descent(model, Y, oc.rho_schedule, oc.newton_steps)
    res = polish(model, X, steps=oc.polish_steps, feas_tol=oc.feas_tol, kkt_tol=oc.kkt_tol,
                 max_move=math.inf)
    out = X.copy()
    ok = np.zeros(len(Y), bool)
    _, q = problem.values(X)
    viol = model.violation(q)
    for r, pr in enumerate(res):
        if pr.ok:
            out[r], ok[r] = pr.x, True
        elif viol[r] < oc.feas_tol:
            ok[r] = True
    return out, ok


def _residual(problem: ProblemSpec, X) -> np.ndarray:
    _, q = problem.values(X)
    ne = problem.n_eq
    return np.abs(q[:, :ne]).sum(axis=1) + np.maximum(q[:, ne:], 0).sum(axis=1)


def _shells(n: int, cfg: AnalysisConfig) -> list:
    U = sphere_points(n, cfg.cq_samples)
    return [cfg.cq_radius * 2.0 ** -k * U for k in range(cfg.mscq_shells)]


# projected points satisfy their active constraints to rounding level, so a
# tight cut keeps nearly active constraints from being counted as active
_SAMPLE_ACTIVE_TOL = 1e-12
# estimates beyond this are treated as numerically unbounded
_MODULUS_CAP = 1e6


def _growth(per_shell) -> bool:
    vals = [v for v in per_shell if v is not None]
    if any(not np.isfinite(v) or v > _MODULUS_CAP for v in vals):
        return True
    return any(b > 10.0 * max(a, 1e-300) for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# pointwise conditions


def check_licq(pd: PointData, act: ActiveSet, cfg: AnalysisConfig | None = None) -> CQRecord:
    """Linear independence of the equality and active inequality gradients."""
    cfg = cfg or AnalysisConfig()
    W = list(act.working)
    if not W:
        return CQRecord("LICQ", HOLDS, notes=["no active constraints"])
    G = pd.jacobian[W]
    r, N = rank_and_nullspace(G.T, cfg.rank_tol, ncols=len(W))
    if r == len(W):
        return CQRecord("LICQ", HOLDS, details={"rank": r, "count": len(W)})
    lam = np.zeros(pd.l)
    lam[W] = N[:, 0]
    return CQRecord("LICQ", FAILS, {"multiplier": lam}, certified=True,
                    details={"rank": r, "count": len(W)})


def verify_mfcq_witness(pd: PointData, act: ActiveSet, lam, tol: float = 1e-8) -> bool:
    """A nonzero normal-cone multiplier annihilating the gradients disproves MFCQ."""
    lam = np.asarray(lam, float)
    if np.linalg.norm(lam) <= tol:
        return False
    for i in range(pd.l):
        if i >= pd.n_eq and i not in act.active and abs(lam[i]) > tol:
            return False
        if i in act.active and lam[i] < -tol:
            return False
    return bool(np.linalg.norm(pd.jacobian.T @ lam) <= tol * (1.0 + np.abs(pd.jacobian).max(initial=0.0)))


def _multiplier_cone(pd: PointData, act: ActiveSet) -> SignedPolyhedron:
    signs = [FREE if i < pd.n_eq else NONNEG if i in act.active else ZERO for i in range(pd.l)]
    return SignedPolyhedron(pd.jacobian.T.reshape(pd.n, pd.l), np.zeros(pd.n), signs)


def check_mfcq(pd: PointData, act: ActiveSet, cfg: AnalysisConfig | None = None) -> CQRecord:
    """Positive linear independence of the active gradients.

    Equality gradients are tested for independence first; then MFCQ fails
    iff some multiplier with nonnegative active-inequality part summing to
    one annihilates the gradients.  The reported witness is the normalized
    sum of the extreme rays of that cone.  When MFCQ holds the modulus
    ``max 1/||Jacobian^T lambda||`` over unit normal-cone multipliers is
    reported.
    """
    cfg = cfg or AnalysisConfig()
    W = list(act.working)
    if not W:
        return CQRecord("MFCQ", HOLDS, modulus=0.0, notes=["no active constraints"])
    E = list(act.equalities)
    details = {"equality_rank_full": True}
    if E:
        r, N = rank_and_nullspace(pd.jacobian[E].T, cfg.rank_tol, ncols=len(E))
        if r < len(E):
            lam = np.zeros(pd.l)
            lam[E] = N[:, 0]
            details["equality_rank_full"] = False
            return CQRecord("MFCQ", FAILS, {"multiplier": lam},
                            certified=verify_mfcq_witness(pd, act, lam),
                            notes=["equality gradients are linearly dependent"], details=details)
    I = list(act.active)
    C = _multiplier_cone(pd, act)
    if I:
        norm = np.zeros((1, pd.l))
        norm[0, I] = 1.0
        P = SignedPolyhedron(np.vstack([C.A, norm]), np.concatenate([C.b, [1.0]]), C.signs)
        lp = solve_lp(np.zeros(pd.l), P, "max", cfg.lp_pivot_tol, cfg.feas_tol)
        if lp.status != "infeasible":
            rays, _ = cone_extreme_rays(C, cfg.cone_tol)
            rays = [r for r in rays if np.abs(r[I]).max() > cfg.cone_tol]
            lam = np.sum(rays, axis=0) if rays else lp.x
            lam = lam / np.linalg.norm(lam)
            lam[np.abs(lam) < 1e-15] = 0.0
            return CQRecord("MFCQ", FAILS, {"multiplier": lam},
                            certified=verify_mfcq_witness(pd, act, lam), details=details)
    M = pd.jacobian[W].T
    gain, _ = cone_min_gain(M, [i >= pd.n_eq for i in W])
    mod = math.inf if gain <= 0 else 1.0 / gain
    return CQRecord("MFCQ", HOLDS, modulus=mod, details=details,
                    notes=["modulus is a numerical estimate"])


def _tlin(pd: PointData, act: ActiveSet, cfg):
    A_eq = pd.jacobian[list(act.equalities)].reshape(-1, pd.n)
    A_le = pd.jacobian[list(act.active)].reshape(-1, pd.n)
    return cone_generators(A_eq, A_le, pd.n, cfg.cone_tol)


def _project_to_cone(u, rays, L):
    """Nearest point of ``cone(rays) + span(L)`` to ``u``."""
    from scipy.optimize import nnls

    cols = list(rays) + list(L.T) + [-w for w in L.T]
    if not cols:
        return np.zeros_like(u)
    G = np.array(cols).T
    mu, _ = nnls(G, u)
    return G @ mu


def soscms_candidates(pd: PointData, act: ActiveSet, cfg: AnalysisConfig) -> list:
    """Nonzero directions of the linearized cone: generators, pair sums, projected samples."""
    rays, L = _tlin(pd, act, cfg)
    gens = list(rays) + [s * w for w in L.T for s in (1.0, -1.0)]
    out = list(gens)
    for a, b in itertools.combinations(range(len(gens)), 2):
        for w in (gens[a] + gens[b], gens[a] - gens[b]):
            if np.linalg.norm(w) > 1e-9 and _in_tlin(pd, act, w):
                out.append(w / np.linalg.norm(w))
    if gens:
        for s in sphere_points(pd.n, cfg.sphere_samples):
            w = _project_to_cone(s, rays, L)
            if np.linalg.norm(w) > 1e-6:
                out.append(w / np.linalg.norm(w))
    uniq = []
    for w in out:
        if not any(np.linalg.norm(w - z) <= 1e-9 for z in uniq):
            uniq.append(w)
    return uniq


def _in_tlin(pd, act, w, tol=1e-9):
    J = pd.jacobian
    for i in act.equalities:
        if abs(J[i] @ w) > tol:
            return False
    return all(J[i] @ w <= tol for i in act.active)


def verify_soscms_witness(pd: PointData, act: ActiveSet, u, lam, part: Partition,
                          tol: float = 1e-8) -> bool:
    """Whether ``(u, lambda)`` violates the second-order condition for metric subregularity."""
    u = np.asarray(u, float)
    lam = np.asarray(lam, float)
    if np.linalg.norm(u) <= tol or not _in_tlin(pd, act, u, tol):
        return False
    if np.linalg.norm(pd.jacobian.T @ lam) > tol * (1.0 + np.abs(pd.jacobian).max(initial=0.0)):
        return False
    for i in range(pd.n_eq, pd.l):
        if i in act.active and lam[i] < -tol:
            return False
        if i not in act.active and abs(lam[i]) > tol:
            return False
    if np.abs(lam[list(part.e1) + list(part.i1)]).sum() <= tol:
        return False
    return float(lam @ curvature(pd, u)) >= -tol


def _section(pd, act, part, sigma):
    """Multipliers with ``Jacobian^T lambda = 0`` and unit signed ``(E1, I1)`` mass.

    Variables are ``lambda`` with ``E1`` coordinates flipped by ``sigma`` so
    that they become nonnegative.
    """
    flip = np.ones(pd.l)
    for s, i in zip(sigma, part.e1):
        flip[i] = s
    signs = []
    for i in range(pd.l):
        if i < pd.n_eq:
            signs.append(NONNEG if i in part.e1 else FREE)
        elif i in act.active:
            signs.append(NONNEG)
        else:
            signs.append(ZERO)
    A = pd.jacobian.T.reshape(pd.n, pd.l) * flip[None, :]
    norm = np.zeros((1, pd.l))
    norm[0, list(part.e1) + [i for i in part.i1 if i in act.active]] = 1.0
    P = SignedPolyhedron(np.vstack([A, norm]), np.concatenate([np.zeros(pd.n), [1.0]]), signs)
    return P, flip


def check_soscms(pd: PointData, act: ActiveSet, partition: Partition | None = None,
                 cfg: AnalysisConfig | None = None) -> CQRecord:
    """Second-order sufficient condition for metric subregularity.

    For ``u`` in the linearized cone the condition forbids a multiplier in
    the normal cone with ``Jacobian^T lambda = 0``, nonnegative curvature
    ``<u, Hess<lambda, q> u>`` and nonzero ``(E1, I1)`` part.  When the
    linearized cone is a subspace with orthonormal basis ``B`` the check is
    exact: the largest eigenvalue of ``B^T Hess<lambda, q> B`` is convex in
    ``lambda``, so it suffices to test the vertices of the normalized
    multiplier section.  Otherwise each candidate direction is tested by
    an LP and a pass is reported as sampled.
    """
    cfg = cfg or AnalysisConfig()
    part = partition or Partition.default(pd.n_eq, pd.l)
    name = "SOSCMS"
    if not act.working or not (part.e1 or set(part.i1) & set(act.active)):
        return CQRecord(name, HOLDS, notes=["no multipliers to constrain"])
    rays, L = _tlin(pd, act, cfg)
    if not rays and L.shape[1] == 0:
        return CQRecord(name, HOLDS, notes=["linearized cone is trivial"])
    patterns = _sign_patterns(part.e1, cfg.subset_cap)
    details = {"partition": {"E1": list(part.e1), "I1": list(part.i1)}}
    sections = [_section(pd, act, part, s) for s in patterns]
    if not rays:
        B = orthonormal_range(L)
        exact = True
        for P, flip in sections:
            vs = enumerate_vertices(P, feas_tol=cfg.feas_tol, dedupe_tol=cfg.dedupe_tol)
            if not vs.bounded:
                exact = False
            for y in vs.vertices:
                lam = y * flip
                H = np.tensordot(lam, pd.constraint_hessians, axes=1)
                w, V = np.linalg.eigh(B.T @ H @ B)
                if w[-1] >= -cfg.strict_tol:
                    u = B @ V[:, -1]
                    u = u / np.linalg.norm(u)
                    return CQRecord(name, FAILS_WITH_WITNESS, {"direction": u, "multiplier": lam},
                                    certified=verify_soscms_witness(pd, act, u, lam, part),
                                    details=details)
        if exact:
            details["method"] = "subspace"
            return CQRecord(name, HOLDS, details=details)
    cands = soscms_candidates(pd, act, cfg)
    for u in cands:
        c = curvature(pd, u)
        for P, flip in sections:
            # curvature row: sum_i lambda_i c_i - s = 0 with slack s >= 0
            A = np.hstack([P.A, np.zeros((P.A.shape[0], 1))])
            row = np.concatenate([c * flip, [-1.0]])[None, :]
            Q = SignedPolyhedron(np.vstack([A, row]), np.concatenate([P.b, [0.0]]), P.signs + (NONNEG,))
            lp = solve_lp(np.zeros(pd.l + 1), Q, "max", cfg.lp_pivot_tol, cfg.feas_tol)
            if lp.status != "infeasible":
                lam = lp.x[:pd.l] * flip
                return CQRecord(name, FAILS_WITH_WITNESS, {"direction": u, "multiplier": lam},
                                certified=verify_soscms_witness(pd, act, u, lam, part),
                                details=details)
    details["method"] = "sampled"
    details["directions"] = len(cands)
    return CQRecord(name, HOLDS_SAMPLED, details=details)


# ---------------------------------------------------------------------------
# neighborhood conditions


def check_crcq_sampled(problem: ProblemSpec, pd: PointData, act: ActiveSet,
                       cfg: AnalysisConfig | None = None) -> CQRecord:
    """Constant rank of every subfamily of active gradients on sampled nearby points."""
    cfg = cfg or AnalysisConfig()
    W = list(act.working)
    if not W:
        return CQRecord("CRCQ", HOLDS, notes=["no active constraints"])
    count = 2 ** len(W)
    if count > cfg.crcq_subset_cap:
        return CQRecord("CRCQ", INCONCLUSIVE,
                        notes=[f"{count} subsets exceed the cap of {cfg.crcq_subset_cap}"])
    X = pd.x + cfg.cq_radius * ball_points(pd.n, cfg.cq_samples)
    _, _, _, _, J, _ = problem.derivatives(X)
    for size in range(1, len(W) + 1):
        for A in itertools.combinations(W, size):
            r0 = rank(pd.jacobian[list(A)], cfg.rank_tol)
            S = np.linalg.svd(J[:, list(A)], compute_uv=False)
            smax = np.where(S[:, :1] > 0, S[:, :1], 1.0)
            ranks = (S > cfg.rank_tol * smax).sum(axis=1)
            bad = np.nonzero(ranks != r0)[0]
            if bad.size:
                k = int(bad[0])
                return CQRecord("CRCQ", FAILS_WITH_WITNESS,
                                {"subset": list(A), "point": X[k], "rank_at_point": r0,
                                 "rank_at_sample": int(ranks[k])},
                                certified=True)
    return CQRecord("CRCQ", HOLDS_SAMPLED,
                    details={"samples": int(len(X)), "radius": cfg.cq_radius, "subsets": count - 1})


def check_mscq_sampled(problem: ProblemSpec, pd: PointData, cfg: AnalysisConfig | None = None,
                       projections=None) -> CQRecord:
    """Distance to the feasible set against the constraint residual on sample shells.

    The distance is estimated by projecting each sample; the estimate of the
    subregularity modulus is the largest ratio.  A jump by more than a
    factor of ten between consecutive shells is reported as inconclusive.
    """
    cfg = cfg or AnalysisConfig()
    if problem.n_eq + problem.n_ineq == 0:
        return CQRecord("MSCQ", HOLDS, modulus=0.0, notes=["no constraints"])
    shells = [pd.x + S for S in _shells(pd.n, cfg)]
    if projections is None:
        projections = [project_feasible(problem, Y, cfg) for Y in shells]
    per_shell, failures, kappa, arg = [], 0, 0.0, None
    for Y, (X, ok) in zip(shells, projections):
        res = _residual(problem, Y)
        dist = np.linalg.norm(X - Y, axis=1)
        failures += int((~ok).sum())
        use = ok & (res > 1e-12)
        if not use.any():
            per_shell.append(None)
            continue
        ratio = dist[use] / res[use]
        k = int(np.argmax(ratio))
        per_shell.append(float(ratio[k]))
        if ratio[k] > kappa:
            kappa, arg = float(ratio[k]), Y[use][k]
    details = {"shell_moduli": per_shell, "projection_failures": failures}
    if _growth(per_shell):
        return CQRecord("MSCQ", INCONCLUSIVE, modulus=kappa, details=details,
                        notes=["modulus estimate grows across shells"])
    return CQRecord("MSCQ", HOLDS_SAMPLED, {"point": arg} if arg is not None else {},
                    modulus=kappa, details=details)


def check_bepp_sampled(problem: ProblemSpec, pd: PointData, cfg: AnalysisConfig | None = None,
                       projections=None) -> CQRecord:
    """Uniform bound on extreme multipliers at sampled feasible points.

    An extreme multiplier is supported on a set ``B`` with independent
    gradients and nonnegative inequality part, so its norm relative to
    ``||x*||`` is at most ``1 / min ||Jacobian_B^T y||`` over unit ``y``
    with that sign pattern.  The largest such bound over the reference
    point and projected samples is the estimate.
    """
    cfg = cfg or AnalysisConfig()
    ne = problem.n_eq
    if ne and rank(pd.jacobian[:ne], cfg.rank_tol) < ne:
        return CQRecord("BEPP", FAILS, notes=["equality gradients are linearly dependent"],
                        certified=True)
    if problem.n_eq + problem.n_ineq == 0:
        return CQRecord("BEPP", HOLDS, modulus=0.0, notes=["no constraints"])
    shells = [pd.x + S for S in _shells(pd.n, cfg)]
    if projections is None:
        projections = [project_feasible(problem, Y, cfg) for Y in shells]

    def bound(x, J, q):
        act = [i for i in range(ne, q.size) if abs(q[i]) <= _SAMPLE_ACTIVE_TOL]
        worst = 0.0
        E = list(range(ne))
        for size in range(len(act) + 1):
            for S in itertools.combinations(act, size):
                B = E + list(S)
                if not B:
                    continue
                G = J[B]
                if rank(G, cfg.rank_tol) < len(B):
                    continue
                gain, _ = cone_min_gain(G.T, [i >= ne for i in B])
                worst = max(worst, math.inf if gain <= 0 else 1.0 / gain)
        return worst

    kappa = bound(pd.x, pd.jacobian, pd.q)
    per_shell, failures = [], 0
    for X, ok in projections:
        failures += int((~ok).sum())
        if not ok.any():
            per_shell.append(None)
            continue
        _, _, _, Q, J, _ = problem.derivatives(X[ok])
        val = max(bound(x, j, q) for x, j, q in zip(X[ok], J, Q))
        per_shell.append(val)
        kappa = max(kappa, val)
    details = {"shell_moduli": per_shell, "projection_failures": failures}
    if _growth(per_shell + [kappa]) or not math.isfinite(kappa):
        return CQRecord("BEPP", INCONCLUSIVE, modulus=kappa, details=details,
                        notes=["multiplier bound grows across shells"])
    return CQRecord("BEPP", HOLDS_SAMPLED, modulus=kappa, details=details)


def cq_suite(problem: ProblemSpec, pd: PointData, act: ActiveSet | None = None,
             partition: Partition | None = None, cfg: AnalysisConfig | None = None) -> CQReport:
    """All six checks; the neighborhood checks share one set of projections."""
    cfg = cfg or AnalysisConfig()
    act = act or active_set(pd, cfg.active_tol)
    projections = None
    if problem.n_eq + problem.n_ineq:
        projections = [project_feasible(problem, pd.x + S, cfg) for S in _shells(pd.n, cfg)]
    return CQReport(
        check_licq(pd, act, cfg),
        check_mfcq(pd, act, cfg),
        check_crcq_sampled(problem, pd, act, cfg),
        check_mscq_sampled(problem, pd, cfg, projections),
        check_bepp_sampled(problem, pd, cfg, projections),
        check_soscms(pd, act, partition, cfg),
    )
