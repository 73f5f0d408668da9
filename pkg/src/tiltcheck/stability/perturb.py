"""Constraint perturbation that destroys tilt stability while keeping second-order data.

Given an extreme multiplier ``lambda`` optimal along a critical direction
``v`` whose reduced Hessian has a nonpositive direction, the constraints
active with ``lambda`` are bent along the parabola
``xbar + t v + t^2/2 z``.  The modified constraints agree with the original
ones to second order at ``xbar``, yet the reference point is no longer a
tilt-stable minimizer of the modified program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..config import AnalysisConfig
from ..expr import Expr, PointData, ProblemSpec, const, eval_point, relu3, sqrt, substitute, var
from ..polyhedra import solve_lp_general
from .second_order import directional_active
from .sets import ActiveSet, curvature, strict_set

__all__ = ["PerturbationError", "PerturbedProblem", "perturb_problem", "second_order_match"]


class PerturbationError(ValueError):
    """The data do not satisfy the preconditions of the construction."""


@dataclass
class PerturbedProblem:
    """The modified program together with the data used to build it."""

    original: ProblemSpec
    problem: ProblemSpec
    multiplier: np.ndarray
    witness: np.ndarray
    quadratic: float
    v: np.ndarray
    z_tilde: np.ndarray
    alpha: float
    z: np.ndarray
    slope: float
    radius: float
    i_plus: tuple
    i_hat: tuple
    modified: tuple
    match: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def matches(self) -> bool:
        return bool(self.match) and self.match["max_error"] <= self.match["tol"]


def _fold(e: Expr) -> Expr:
    """Collapse variable-free subtrees to constants and drop trivial terms."""
    memo: dict[int, Expr] = {}

    def rec(e: Expr) -> Expr:
        key = id(e)
        if key in memo:
            return memo[key]
        if e.op in ("const", "var"):
            out = e
        else:
            args = tuple(rec(a) for a in e.args)
            if all(a.op == "const" for a in args):
                from ..expr import evaluate

                val = float(evaluate(Expr(e.op, args, e.value), np.zeros((1, 1)))[0])
                out = const(val) if math.isfinite(val) else Expr(e.op, args, e.value)
            elif e.op in ("add", "sub") and args[1].op == "const" and args[1].value == 0.0:
                out = args[0]
            elif e.op == "add" and args[0].op == "const" and args[0].value == 0.0:
                out = args[1]
            elif e.op == "sub" and args[0].op == "const" and args[0].value == 0.0:
                out = -args[1]
            elif e.op == "mul" and any(a.op == "const" and a.value == 0.0 for a in args):
                out = const(0.0)
            elif e.op == "mul" and args[0].op == "const" and args[0].value == 1.0:
                out = args[1]
            elif e.op == "mul" and args[1].op == "const" and args[1].value == 1.0:
                out = args[0]
            else:
                out = Expr(e.op, args, e.value)
        memo[key] = out
        return out

    return rec(e)


def _linear(coef, xbar, n) -> Expr | None:
    """``<coef, x - xbar>`` as an expression (``None`` when ``coef = 0``)."""
    out = None
    for j in range(n):
        if coef[j] == 0.0:
            continue
        d = var(j) - const(xbar[j]) if xbar[j] != 0.0 else var(j)
        term = d if coef[j] == 1.0 else const(coef[j]) * d
        out = term if out is None else out + term
    return out


def _sqdist(xbar, n) -> Expr:
    out = None
    for j in range(n):
        d = var(j) - const(xbar[j]) if xbar[j] != 0.0 else var(j)
        out = d ** 2 if out is None else out + d ** 2
    return out


def _dual_direction(pd: PointData, act: ActiveSet, lam, v, cfg):
    """A ``z`` with ``<grad q_i, z> + <v, Hess q_i v>`` zero on the strict rows and
    nonpositive on the other active inequalities, minimizing ``<grad f, z>``."""
    c = curvature(pd, v)
    ip = strict_set(lam, act, cfg.strict_tol)
    eq = list(act.equalities) + list(ip)
    le = [i for i in act.active if i not in ip]
    J = pd.jacobian
    res = solve_lp_general(pd.grad_objective, J[eq].reshape(len(eq), pd.n), -c[eq],
                           J[le].reshape(len(le), pd.n), -c[le], sense="min",
                           feas_tol=cfg.feas_tol)
    if res.status != "optimal":
        raise PerturbationError(f"direction program is {res.status}; the multiplier is not "
                                "optimal along the given direction")
    z = res.x
    z[np.abs(z) < 1e-15] = 0.0
    return z, ip


def second_order_match(original: ProblemSpec, modified: ProblemSpec, tol: float = 1e-8) -> dict:
    """Largest differences of constraint values, gradients and Hessians at the point."""
    a = eval_point(original)
    b = eval_point(modified)
    errs = {
        "value": float(np.abs(a.q - b.q).max(initial=0.0)),
        "gradient": float(np.abs(a.jacobian - b.jacobian).max(initial=0.0)),
        "hessian": float(np.abs(a.constraint_hessians - b.constraint_hessians).max(initial=0.0)),
    }
    errs["max_error"] = max(errs.values())
    errs["tol"] = tol
    return errs


def perturb_problem(problem: ProblemSpec, pd: PointData, act: ActiveSet, lam, w, v,
                    cfg: AnalysisConfig | None = None, soscms_ok: bool | None = None) -> PerturbedProblem:
    """Build the modified program from a multiplier, a flat direction and a critical direction.

    ``lam`` must be optimal for the curvature program along the unit
    direction ``v``, and ``w`` must satisfy
    ``<w, Hess L(xbar, lam) w> <= 0`` up to the strictness tolerance.
    """
    cfg = cfg or AnalysisConfig()
    lam = np.asarray(lam, float)
    w = np.asarray(w, float)
    v = np.asarray(v, float)
    n = pd.n
    warnings = []
    if not np.isclose(np.linalg.norm(v), 1.0, atol=1e-9):
        raise PerturbationError("direction must have unit length")
    quad = float(w @ pd.lagrangian_hessian(lam) @ w)
    if np.linalg.norm(w) == 0 or quad > cfg.strict_tol * (1.0 + w @ w):
        raise PerturbationError("witness must give a nonpositive Lagrangian quadratic form")
    if soscms_ok is None:
        warnings.append("second-order condition for metric subregularity was not checked")
    elif not soscms_ok:
        warnings.append("second-order condition for metric subregularity is not verified")

    z_tilde, ip = _dual_direction(pd, act, lam, v, cfg)
    alpha = max(0.0, -float(z_tilde @ v)) + 1.0
    z = z_tilde + alpha * v
    cz = float(z @ v)
    r = 1.0 / (4.0 * cz)

    xbar = pd.x
    c = curvature(pd, v)
    Iv = directional_active(pd, act, v, cfg.cone_tol)
    scale = 1.0 + np.abs(pd.jacobian).max(initial=0.0) * np.linalg.norm(z) + np.abs(c).max(initial=0.0)
    i_hat = tuple(i for i in Iv if abs(pd.jacobian[i] @ z + c[i]) <= 1e-9 * scale)

    sq = _sqdist(xbar, n)
    lin = _linear(v, xbar, n)
    inner = const(1.0)
    if lin is not None:
        inner = inner + const(2.0 * cz) * lin
    inner = inner + const(64.0 * cz ** 3) * relu3(sqrt(sq) - const(r))
    theta = (sqrt(inner) - const(1.0)) / const(cz)
    path = []
    for j in range(n):
        e = const(xbar[j])
        if v[j] != 0.0:
            e = e + const(v[j]) * theta
        if z[j] != 0.0:
            e = e + const(0.5 * z[j]) * theta ** 2
        path.append(e)

    cons = list(problem.constraints)
    strict = set(act.equalities) | set(ip)
    modified = []
    for i in range(len(cons)):
        if i in strict or i in i_hat:
            e = cons[i] - substitute(cons[i], path)
            if i not in strict:
                e = e - sq ** 2
            cons[i] = _fold(e)
            modified.append(i)
    ne = problem.n_eq
    new = ProblemSpec(n, problem.objective, tuple(cons[:ne]), tuple(cons[ne:]), xbar.copy(),
                      dict(problem.params))
    match = second_order_match(problem, new)
    if match["max_error"] > match["tol"]:
        warnings.append("modified constraints do not match the original ones to second order")
    return PerturbedProblem(problem, new, lam, w, quad, v, z_tilde, alpha, z, cz, r,
                            tuple(ip), i_hat, tuple(modified), match, warnings)
