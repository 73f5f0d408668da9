"""The full analysis pipeline and its report."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..config import AnalysisConfig
from ..expr import PointData, ProblemSpec, eval_point, to_string
from ..polyhedra import BudgetExceeded
from ..serialize import jsonable, labels
from .cq import CQReport, Partition, cq_suite
from .second_order import (CRCQCharacterization, NecessityResult, SufficiencyResult,
                           crcq_characterization, necessity_applicability,
                           sufficient_condition)
from .sets import (ActiveSet, CriticalCone, LambdaBarE, MultiplierSet, active_set,
                   critical_cone, i_plus_union, lambda_bar_E, multiplier_set)

__all__ = [
    "CERTIFIED", "NOT_CERTIFIED", "SUFFICIENT_ONLY", "INCONCLUSIVE", "VERDICTS",
    "StabilityReport", "analyze", "cq_to_dict", "oracle_to_dict",
]

CERTIFIED = "TILT_STABLE_CERTIFIED"
NOT_CERTIFIED = "NOT_TILT_STABLE_CERTIFIED"
SUFFICIENT_ONLY = "SUFFICIENT_ONLY"
INCONCLUSIVE = "INCONCLUSIVE"
VERDICTS = (CERTIFIED, NOT_CERTIFIED, SUFFICIENT_ONLY, INCONCLUSIVE)


@dataclass
class StabilityReport:
    """Everything computed by :func:`analyze`.

    ``status`` is ``ok``, ``infeasible`` or ``noKKT``; in the latter two
    cases the second-order parts are ``None``.
    """

    problem: ProblemSpec
    config: AnalysisConfig
    status: str
    point: PointData | None = None
    active: ActiveSet | None = None
    first_order_residual: float = math.nan
    multipliers: MultiplierSet | None = None
    i_plus: tuple = ()
    cqs: CQReport | None = None
    cone: CriticalCone | None = None
    lambda_bar: LambdaBarE | None = None
    sufficiency: SufficiencyResult | None = None
    necessity: NecessityResult | None = None
    crcq: CRCQCharacterization | None = None
    crcq_applicable: bool = False
    verdict: str = INCONCLUSIVE
    tilt_bound: float | None = None
    bound_kind: str | None = None
    reason: str = ""
    witness: dict | None = None
    oracle: object | None = None
    notes: list = field(default_factory=list)

    @property
    def kkt(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return jsonable(_report_dict(self))


def analyze(problem: ProblemSpec, config: AnalysisConfig | None = None) -> StabilityReport:
    """Run the second-order tilt-stability analysis at the reference point.

    The verdict is

    * ``TILT_STABLE_CERTIFIED`` when the critical cone is trivial, when the
      constant-rank characterization applies and holds, or when the
      positive-definiteness test holds over an exactly computed set of
      extreme directional multipliers;
    * ``NOT_TILT_STABLE_CERTIFIED`` when the constant-rank
      characterization fails, or when a failing multiplier's own witnessing
      direction satisfies nondegeneracy or 2-regularity;
    * ``SUFFICIENT_ONLY`` when the test holds only over sampled directions;
    * ``INCONCLUSIVE`` otherwise.

    Every certified verdict also requires a supported constraint
    qualification.
    """
    cfg = config or AnalysisConfig()
    pd = eval_point(problem)
    act = active_set(pd, cfg.active_tol)
    rep = StabilityReport(problem, cfg, "ok", pd, act)
    if not act.feasible:
        rep.status = "infeasible"
        rep.reason = "the reference point violates a constraint"
        return rep
    xstar = -pd.grad_objective
    ms = multiplier_set(pd, xstar, act, cfg)
    rep.multipliers = ms
    if ms.empty:
        rep.status = "noKKT"
        rep.first_order_residual = ms.residual
        rep.reason = "no Lagrange multiplier exists at the reference point"
        return rep
    rep.first_order_residual = float(np.linalg.norm(pd.jacobian.T @ ms.vertices[0] - xstar)) \
        if ms.vertices else 0.0
    if rep.first_order_residual > cfg.first_order_tol * (1.0 + np.linalg.norm(xstar)):
        rep.notes.append("multiplier residual exceeds the first-order tolerance")
    rep.i_plus, _ = i_plus_union(ms, act, cfg)
    partition = None
    if cfg.partition_e1 is not None or cfg.partition_i1 is not None:
        # the config holds 1-based constraint labels
        e1 = tuple(i - 1 for i in cfg.partition_e1) if cfg.partition_e1 is not None else tuple(range(pd.n_eq))
        i1 = tuple(i - 1 for i in cfg.partition_i1) if cfg.partition_i1 is not None else tuple(range(pd.n_eq, pd.l))
        partition = Partition(e1, i1)
    rep.cqs = cq_suite(problem, pd, act, partition, cfg)
    qualified = rep.cqs.qualified
    if not qualified:
        rep.notes.append("no constraint qualification supporting the second-order theory was verified")
    K = critical_cone(pd, xstar, ms, act, cfg)
    rep.cone = K
    if not K.consistent:
        rep.notes.append("critical cone representation disagrees between multipliers")
    lbe = lambda_bar_E(pd, ms, K, cfg)
    rep.lambda_bar = lbe
    if lbe.unbounded:
        rep.notes.append("curvature program unbounded along some critical direction")
    rep.sufficiency = sufficient_condition(pd, lbe, act, cfg.kappa, cfg)
    try:
        rep.necessity = necessity_applicability(pd, act, lbe, cfg)
    except BudgetExceeded as err:
        rep.notes.append(str(err))
    if rep.cqs.crcq.ok and rep.cqs.equality_gradients_independent and not K.trivial:
        rep.crcq = crcq_characterization(pd, act, ms, cfg.kappa, cfg)
        rep.crcq_applicable = rep.crcq.constancy_ok
        if not rep.crcq.constancy_ok:
            rep.notes.append("Lagrangian form is not constant over the multipliers on the "
                             "constant-rank subspace; the sampled constant rank check is doubtful")
    _classify(rep, qualified)
    if cfg.run_oracle:
        from ..oracle import tilt_probe

        rep.oracle = tilt_probe(problem, cfg.oracle)
    return rep


def _witness_direction(lbe: LambdaBarE, lam, tol=1e-8):
    for mu, dirs in lbe.entries:
        if np.linalg.norm(mu - lam) <= tol * (1 + np.linalg.norm(lam)):
            return dirs
    return []


def _classify(rep: StabilityReport, qualified: bool):
    K, lbe, suf = rep.cone, rep.lambda_bar, rep.sufficiency
    if K.trivial and qualified:
        rep.verdict, rep.tilt_bound, rep.bound_kind = CERTIFIED, 0.0, "exact"
        rep.reason = "the critical cone is trivial"
        return
    if rep.crcq_applicable and qualified:
        c = rep.crcq
        rep.tilt_bound = c.bound
        rep.bound_kind = "exact" if c.bound is not None else None
        if c.holds:
            rep.verdict = CERTIFIED
            rep.reason = "reduced Hessian on the constant-rank subspace is positive definite"
        else:
            rep.verdict = NOT_CERTIFIED
            rep.reason = "reduced Hessian on the constant-rank subspace is not positive definite"
            rep.witness = {"multiplier": c.multiplier, "w": c.record.witness,
                           "quadratic": c.record.min_eig}
        return
    if suf.holds and lbe.exact and qualified:
        rep.verdict, rep.tilt_bound = CERTIFIED, suf.bound
        rep.bound_kind = "exact" if rep.necessity is not None and rep.necessity.applicable else "lowerBound"
        rep.reason = "reduced Hessians are positive definite at every extreme directional multiplier"
        return
    if not suf.holds and qualified and rep.necessity is not None:
        for r in suf.failing:
            for v in _witness_direction(lbe, r.multiplier):
                chk = next((c for c in rep.necessity.checks if np.allclose(c.v, v, atol=1e-12)), None)
                if chk is None:
                    continue
                if chk.nondegenerate or chk.regular_for(r.multiplier):
                    rep.verdict = NOT_CERTIFIED
                    rep.reason = ("a reduced Hessian fails the test and its critical direction is "
                                  + ("nondegenerate" if chk.nondegenerate else "2-regular"))
                    rep.witness = {"multiplier": r.multiplier, "w": r.witness,
                                   "quadratic": r.min_eig, "v": v}
                    return
    if suf.holds:
        rep.verdict, rep.tilt_bound, rep.bound_kind = SUFFICIENT_ONLY, suf.bound, "lowerBound"
        rep.reason = ("positive definiteness holds on sampled critical directions only"
                      if not lbe.exact else "no supporting constraint qualification")
        return
    rep.verdict = INCONCLUSIVE
    rep.reason = "the sufficient test fails and no characterization hypothesis is verified"
    if suf.failing:
        r = suf.failing[0]
        rep.witness = {"multiplier": r.multiplier, "w": r.witness, "quadratic": r.min_eig}


# ---------------------------------------------------------------------------
# serialization


def cq_to_dict(cqs: CQReport) -> dict:
    out = {}
    for rec in cqs.records():
        w = dict(rec.witness)
        if "subset" in w:
            w["subset"] = labels(w["subset"])
        d = {"status": rec.status, "witness": w, "modulus": rec.modulus,
             "certified": rec.certified, "notes": list(rec.notes)}
        det = dict(rec.details)
        if "partition" in det:
            det["partition"] = {k: labels(v) for k, v in det["partition"].items()}
        d["details"] = det
        out[rec.name] = d
    return out


def oracle_to_dict(rep) -> dict:
    cfg = rep.config
    out = {
        "verdict": rep.verdict,
        "lipschitz": rep.lipschitz,
        "tilts": len(rep.records),
        "failures": rep.failures,
        "ambiguous": rep.ambiguous,
        "notes": list(rep.notes),
        "config": dataclasses.asdict(cfg),
    }
    if rep.lipschitz_pair is not None:
        a, b = (rep.records[k] for k in rep.lipschitz_pair)
        out["lipschitzPair"] = [{"tilt": a.tilt, "minimizer": a.minimizer},
                                {"tilt": b.tilt, "minimizer": b.minimizer}]
    w = rep.witness_record
    if w is not None:
        out["witness"] = {"tilt": w.tilt, "value": w.value, "separation": w.separation,
                          "clusters": [{"point": c.point, "value": c.value, "size": c.size}
                                       for c in w.clusters]}
    return out


def _problem_dict(p: ProblemSpec) -> dict:
    return {"dimension": p.dimension, "objective": to_string(p.objective),
            "equalities": [to_string(e) for e in p.equalities],
            "inequalities": [to_string(e) for e in p.inequalities],
            "point": p.point, "params": dict(sorted(p.params.items()))}


def _hessian_dict(r) -> dict:
    return {"multiplier": r.multiplier, "rows": labels(r.index), "basis": r.basis.T,
            "reducedHessian": r.matrix, "minEig": r.min_eig, "witness": r.witness}


def _report_dict(rep: StabilityReport) -> dict:
    cfg = rep.config.to_dict()
    d = {"tool": "tiltcheck", "version": __version__, "problem": _problem_dict(rep.problem)}
    pd, act = rep.point, rep.active
    d["feasibility"] = {
        "feasible": act.feasible,
        "constraintValues": pd.q,
        "active": labels(act.active),
        "equalityViolations": labels(act.eq_violations),
        "inequalityViolations": labels(act.ineq_violations),
    }
    d["status"] = rep.status
    d["firstOrder"] = {"kkt": None if rep.status == "infeasible" else rep.kkt,
                       "residual": rep.first_order_residual,
                       "gradient": pd.grad_objective}
    ms = rep.multipliers
    if ms is not None and not ms.empty:
        d["multipliers"] = {
            "vertices": ms.vertices,
            "strictSets": [labels(s) for s in ms.i_plus],
            "rays": ms.rays,
            "lineality": ms.lineality.T if ms.lineality is not None else [],
            "iPlusUnion": labels(rep.i_plus),
        }
    if rep.cqs is not None:
        d["cqs"] = cq_to_dict(rep.cqs)
    K = rep.cone
    if K is not None:
        d["criticalCone"] = {"trivial": K.trivial, "equalityRows": labels(K.eq_index),
                             "inequalityRows": labels(K.le_index), "rays": K.rays,
                             "lineality": K.lineality.T, "referenceMultiplier": K.reference,
                             "consistent": K.consistent}
    lbe = rep.lambda_bar
    if lbe is not None:
        d["lambdaBarE"] = {"exact": lbe.exact, "mode": lbe.mode, "candidates": lbe.candidates,
                           "entries": [{"multiplier": lam, "directions": dirs}
                                       for lam, dirs in lbe.entries],
                           "unboundedDirections": lbe.unbounded}
    suf = rep.sufficiency
    if suf is not None:
        d["secondOrder"] = {"holds": suf.holds, "kappa": suf.kappa, "threshold": suf.threshold,
                            "vacuous": suf.vacuous, "bound": suf.bound, "band": suf.band,
                            "records": [_hessian_dict(r) for r in suf.records]}
    nec = rep.necessity
    if nec is not None:
        d["necessity"] = {"applicable": nec.applicable, "quality": nec.quality, "directions": [
            {"v": c.v, "kind": c.kind, "nondegenerate": c.nondegenerate,
             "directionalActive": labels(c.directional_active),
             "maximalSets": [labels(s) for s in c.maximal_sets],
             "twoRegular": c.regular, "error": c.error,
             "perMultiplier": [{"multiplier": m["multiplier"], "strictSet": labels(m["strict_set"]),
                                "J": labels(m["J"]) if m["J"] is not None else None,
                                "twoRegular": m["two_regular"]} for m in c.per_multiplier]}
            for c in nec.checks]}
    c = rep.crcq
    if c is not None:
        d["crcqCharacterization"] = {
            "applicable": rep.crcq_applicable, "holds": c.holds, "union": labels(c.union),
            "multiplier": c.multiplier, "record": _hessian_dict(c.record), "bound": c.bound,
            "constancyOk": c.constancy_ok, "constancyGap": c.constancy_gap,
            "strictDirection": c.strict_direction, "strictMargin": c.strict_margin}
    d["verdict"] = rep.verdict
    d["tiltBound"] = rep.tilt_bound
    d["boundKind"] = rep.bound_kind
    d["reason"] = rep.reason
    d["witness"] = rep.witness
    d["oracle"] = oracle_to_dict(rep.oracle) if rep.oracle is not None else None
    d["notes"] = list(rep.notes)
    d["config"] = cfg
    return d
