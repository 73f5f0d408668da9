"""Reduced Hessian tests, directional regularity and the tilt-bound formulas."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..config import AnalysisConfig
from ..expr import PointData
from ..linalg import rank, rank_and_nullspace, sym_eig_min
from ..polyhedra import BudgetExceeded, solve_lp_general
from .sets import (ActiveSet, CriticalCone, DirectionalMultipliers, LambdaBarE,
                   MultiplierSet, curvature, i_plus_union, strict_complementary_direction,
                   strict_set)

__all__ = [
    "ReducedHessian", "reduced_hessian_record", "SufficiencyResult", "sufficient_condition",
    "nondegenerate_in_direction", "two_regularity", "xi_and_maximal_J",
    "DirectionCheck", "NecessityResult", "necessity_applicability",
    "CRCQCharacterization", "crcq_characterization",
]


@dataclass
class ReducedHessian:
    """Lagrangian Hessian restricted to the kernel of the strict working gradients.

    ``witness`` is a unit vector of the kernel attaining ``min_eig``.
    ``min_eig`` is ``inf`` when the kernel is trivial.
    """

    multiplier: np.ndarray
    index: tuple
    basis: np.ndarray
    matrix: np.ndarray
    min_eig: float
    witness: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ratio(self) -> float:
        """``1/min_eig`` with ``1/inf = 0``; ``inf`` when ``min_eig <= 0``."""
        if math.isinf(self.min_eig):
            return 0.0
        return 1.0 / self.min_eig if self.min_eig > 0 else math.inf


def reduced_hessian_record(pd: PointData, lam, act: ActiveSet,
                           cfg: AnalysisConfig | None = None, index=None) -> ReducedHessian:
    """Reduced Hessian of the Lagrangian at ``lam``.

    ``index`` overrides the row set (defaults to the equalities plus the
    inequalities with positive multiplier).
    """
    cfg = cfg or AnalysisConfig()
    lam = np.asarray(lam, float)
    if index is None:
        index = act.equalities + strict_set(lam, act, cfg.strict_tol)
    index = tuple(index)
    rows = pd.jacobian[list(index)].reshape(len(index), pd.n)
    _, A = rank_and_nullspace(rows, cfg.rank_tol, ncols=pd.n)
    HL = pd.lagrangian_hessian(lam)
    M = A.T @ HL @ A
    M = 0.5 * (M + M.T)
    mu, u = sym_eig_min(M)
    w = A @ u if A.shape[1] else np.zeros(pd.n)
    if w.size:
        w[np.abs(w) < 1e-15] = 0.0
    return ReducedHessian(lam, index, A, M, mu, w)


@dataclass
class SufficiencyResult:
    """Outcome of the extreme-multiplier positive-definiteness test."""

    holds: bool
    records: list
    kappa: float | None
    threshold: float
    bound: float | None
    failing: list = field(default_factory=list)
    band: tuple | None = None
    vacuous: bool = False


def sufficient_condition(pd: PointData, lbe: LambdaBarE, act: ActiveSet, kappa: float | None = None,
                         cfg: AnalysisConfig | None = None) -> SufficiencyResult:
    """Positive definiteness of the reduced Hessians over the given multipliers.

    With a modulus ``kappa`` every minimal eigenvalue must exceed
    ``1/kappa`` (plus the strictness tolerance), otherwise it must exceed
    the strictness tolerance.  The lower bound on the exact tilt bound is
    the largest ``1/min_eig`` (``0`` for an empty list).
    """
    cfg = cfg or AnalysisConfig()
    thr = (1.0 / kappa if kappa else 0.0) + cfg.strict_tol
    records = [reduced_hessian_record(pd, lam, act, cfg) for lam in lbe.multipliers]
    failing = [r for r in records if not r.min_eig > thr]
    holds = not failing
    bound = None
    band = None
    if all(r.min_eig > cfg.strict_tol for r in records):
        bound = max((r.ratio for r in records), default=0.0)
        finite = [r.min_eig for r in records if not math.isinf(r.min_eig)]
        if finite:
            mu = min(finite)
            eps = cfg.strict_tol
            band = (1.0 / (mu + eps), 1.0 / (mu - eps) if mu > eps else math.inf)
        else:
            band = (0.0, 0.0)
    return SufficiencyResult(holds, records, kappa, thr, bound, failing, band, not records)


def nondegenerate_in_direction(dm: DirectionalMultipliers) -> bool:
    """The optimal multiplier face in this direction is a single point."""
    return bool(dm.singleton)


def two_regularity(pd: PointData, indices, v, tol: float = 1e-10) -> bool:
    """Directional 2-regularity of the constraints ``indices`` along ``v``.

    With ``G`` the gradient rows and ``N`` a basis of their kernel, the
    test is ``rank [G | M] = s`` where row ``i`` of ``M`` is
    ``v^T Hess q_i N``.
    """
    idx = list(indices)
    if not idx:
        raise ValueError("two_regularity needs a nonempty index set")
    v = np.asarray(v, float)
    G = pd.jacobian[idx].reshape(len(idx), pd.n)
    _, N = rank_and_nullspace(G, tol, ncols=pd.n)
    M = np.einsum("j,ijk,kl->il", v, pd.constraint_hessians[idx], N) if N.shape[1] else np.zeros((len(idx), 0))
    return rank(np.hstack([G, M]), tol) == len(idx)


def directional_active(pd: PointData, act: ActiveSet, v, tol: float = 1e-9) -> tuple:
    """Active inequalities whose gradient is orthogonal to ``v``."""
    v = np.asarray(v, float)
    out = []
    for i in act.active:
        a = pd.jacobian[i]
        if abs(a @ v) <= tol * (1.0 + np.linalg.norm(a)) * max(1.0, np.linalg.norm(v)):
            out.append(i)
    return tuple(out)


def xi_and_maximal_J(pd: PointData, act: ActiveSet, v, cfg: AnalysisConfig | None = None):
    """Directional active set and the admissible index collection along ``v``.

    A subset ``J`` of the directional active set is admissible when some
    ``z`` makes ``<grad q_i, z> + <v, Hess q_i v>`` vanish on the
    equalities and on ``J``, strictly negative on the rest of the
    directional active set and nonpositive on the other active
    inequalities.  Returns ``(I_v, members, maximal)``.
    """
    cfg = cfg or AnalysisConfig()
    Iv = directional_active(pd, act, v, cfg.cone_tol)
    if 2 ** len(Iv) > cfg.subset_cap:
        raise BudgetExceeded("admissible index sets", 2 ** len(Iv), cfg.subset_cap)
    c = curvature(pd, v)
    J = pd.jacobian
    n = pd.n
    rest = [i for i in act.active if i not in Iv]
    members = []
    for size in range(len(Iv) + 1):
        for S in itertools.combinations(Iv, size):
            eq = list(act.equalities) + list(S)
            strict = [i for i in Iv if i not in S]
            A_eq = np.hstack([J[eq].reshape(len(eq), n), np.zeros((len(eq), 1))])
            b_eq = -c[eq]
            rows = [np.concatenate([J[i], [1.0]]) for i in strict]
            rows += [np.concatenate([J[i], [0.0]]) for i in rest]
            rows.append(np.concatenate([np.zeros(n), [1.0]]))
            b_ub = np.concatenate([-c[strict], -c[rest], [1.0]])
            obj = np.zeros(n + 1)
            obj[-1] = 1.0
            res = solve_lp_general(obj, A_eq, b_eq, np.array(rows), b_ub, sense="max",
                                   feas_tol=cfg.feas_tol)
            if res.status != "optimal":
                continue
            if not strict or res.value > cfg.strict_tol:
                members.append(tuple(S))
    maximal = [S for S in members if not any(set(S) < set(T) for T in members)]
    return Iv, members, maximal


@dataclass
class DirectionCheck:
    """Hypotheses of the necessary condition at one critical direction."""

    v: np.ndarray
    kind: str
    nondegenerate: bool
    directional_active: tuple = ()
    maximal_sets: list = field(default_factory=list)
    per_multiplier: list = field(default_factory=list)
    regular: bool = False
    error: str | None = None

    @property
    def passes(self) -> bool:
        return self.nondegenerate or self.regular

    def regular_for(self, lam, tol=1e-8) -> bool:
        for rec in self.per_multiplier:
            if np.linalg.norm(rec["multiplier"] - lam) <= tol * (1 + np.linalg.norm(lam)):
                return rec["two_regular"]
        return False


@dataclass
class NecessityResult:
    checks: list
    applicable: bool
    quality: str


def _regularity_check(pd, act, dm, cfg, kind):
    chk = DirectionCheck(dm.v, kind, nondegenerate_in_direction(dm))
    try:
        Iv, members, maximal = xi_and_maximal_J(pd, act, dm.v, cfg)
    except BudgetExceeded as err:
        chk.error = str(err)
        return chk
    chk.directional_active = Iv
    chk.maximal_sets = maximal
    all_ok = bool(dm.vertices)
    for lam in dm.vertices:
        ip = set(strict_set(lam, act, cfg.strict_tol))
        chosen = None
        for Jh in maximal:
            if ip <= set(Jh):
                idx = list(act.equalities) + list(Jh)
                if idx and two_regularity(pd, idx, dm.v, cfg.rank_tol):
                    chosen = Jh
                    break
        chk.per_multiplier.append({"multiplier": lam, "strict_set": tuple(sorted(ip)),
                                   "J": chosen, "two_regular": chosen is not None})
        all_ok = all_ok and chosen is not None
    chk.regular = all_ok
    return chk


def necessity_applicability(pd: PointData, act: ActiveSet, lbe: LambdaBarE,
                            cfg: AnalysisConfig | None = None) -> NecessityResult:
    """Check nondegeneracy or 2-regularity along every examined critical direction.

    The quality is ``exact`` only when the direction pool is exhaustive and
    every open-arc representative passes by nondegeneracy, which is
    constant along the arc; regularity at a single representative does not
    transfer to the whole arc.
    """
    cfg = cfg or AnalysisConfig()
    checks = []
    for v, kind, dm in lbe.probes:
        if dm.unbounded_lp:
            checks.append(DirectionCheck(v, kind, False, error="unbounded directional program"))
            continue
        checks.append(_regularity_check(pd, act, dm, cfg, kind))
    applicable = all(c.passes for c in checks)
    exact = lbe.exact and all(c.nondegenerate for c in checks if c.kind == "arc")
    return NecessityResult(checks, applicable, "exact" if exact else "sampled")


@dataclass
class CRCQCharacterization:
    """Positive definiteness on the kernel of all possibly-strict working gradients."""

    holds: bool
    union: tuple
    multiplier: np.ndarray
    record: ReducedHessian
    bound: float | None
    constancy_ok: bool
    constancy_gap: float
    strict_direction: np.ndarray
    strict_margin: float
    threshold: float


def crcq_characterization(pd: PointData, act: ActiveSet, ms: MultiplierSet,
                          kappa: float | None = None,
                          cfg: AnalysisConfig | None = None) -> CRCQCharacterization:
    """Reduced Hessian test on the kernel of the equalities and the strict-union rows.

    Under the constant rank condition the Lagrangian quadratic form on
    that kernel does not depend on the multiplier, so one multiplier
    suffices; the constancy is checked across all vertices and recession
    directions as a diagnostic.
    """
    cfg = cfg or AnalysisConfig()
    lam, v, t = strict_complementary_direction(pd, act, ms, cfg)
    union, _ = i_plus_union(ms, act, cfg)
    idx = act.equalities + union
    rec = reduced_hessian_record(pd, lam, act, cfg, index=idx)
    A = rec.basis
    gap = 0.0
    if A.shape[1]:
        forms = [A.T @ pd.lagrangian_hessian(v_) @ A for v_ in ms.vertices]
        ref = rec.matrix
        scale = 1.0 + np.abs(ref).max()
        for F in forms:
            gap = max(gap, float(np.abs(F - ref).max()) / scale)
        dirs = list(ms.rays)
        if ms.lineality is not None:
            dirs += list(ms.lineality.T)
        for r in dirs:
            F = A.T @ np.tensordot(r, pd.constraint_hessians, axes=1) @ A
            gap = max(gap, float(np.abs(F).max()) / scale)
    thr = (1.0 / kappa - cfg.strict_tol) if kappa else cfg.strict_tol
    holds = rec.min_eig >= thr if kappa else rec.min_eig > thr
    bound = rec.ratio if rec.min_eig > cfg.strict_tol else None
    return CRCQCharacterization(holds, union, lam, rec, bound, gap <= 1e-7, gap,
                                v, t, thr)
