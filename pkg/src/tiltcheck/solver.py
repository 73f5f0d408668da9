"""Batched local solver for small smooth NLPs: penalty Newton plus active-set polish.

The model problem is

    minimize  w*(f(x) - <t, x>) + mu/2*||x - c||^2
    s.t.      q_E(x) = 0, q_I(x) <= 0,
              f(x) - <t, x> <= level          (optional)
              ||x - center|| <= radius        (optional)

with one tilt ``t``, prox center ``c`` and level per row of the batch.  The
penalty phase runs damped Newton on a quadratic-penalty function over an
increasing penalty schedule, warm-starting each stage.  The polish phase
solves the KKT system on a guessed active set for all rows at once and
verifies the multipliers by nonnegative least squares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .expr import ProblemSpec

__all__ = ["TiltedModel", "PolishResult", "penalty_descent", "polish"]


@dataclass
class TiltedModel:
    """A batch of tilted, prox-regularized copies of one problem."""

    problem: ProblemSpec
    tilts: np.ndarray
    weight: float = 1.0
    prox_weight: float = 0.0
    prox_centers: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None
    levels: np.ndarray | None = None

    def __post_init__(self):
        self.tilts = np.atleast_2d(np.asarray(self.tilts, float))
        n = self.problem.dimension
        if self.prox_centers is None:
            self.prox_centers = np.zeros_like(self.tilts)
        self.prox_centers = np.atleast_2d(np.asarray(self.prox_centers, float))
        if self.center is None:
            self.center = self.problem.point
        self.center = np.asarray(self.center, float).reshape(n)
        if self.levels is not None:
            self.levels = np.asarray(self.levels, float).reshape(-1)

    @property
    def n_eq(self) -> int:
        return self.problem.n_eq

    def data(self, X, rows=None):
        """Objective value, gradient and Hessian plus augmented constraint data."""
        rows = slice(None) if rows is None else rows
        T = self.tilts[rows]
        f, gf, Hf, q, J, Hq = self.problem.derivatives(X)
        m, n = X.shape
        D = X - self.prox_centers[rows]
        tv = f - np.einsum("ij,ij->i", T, X)
        tg = gf - T
        val = self.weight * tv + 0.5 * self.prox_weight * np.einsum("ij,ij->i", D, D)
        grad = self.weight * tg + self.prox_weight * D
        hess = self.weight * Hf + self.prox_weight * np.eye(n)[None]
        qs, Js, Hs = [q], [J], [Hq]
        if self.levels is not None:
            qs.append((tv - self.levels[rows])[:, None])
            Js.append(tg[:, None, :])
            Hs.append(Hf[:, None])
        if self.radius is not None:
            Y = X - self.center
            qs.append((np.einsum("ij,ij->i", Y, Y) - self.radius ** 2)[:, None])
            Js.append(2 * Y[:, None, :])
            Hs.append(np.broadcast_to(2 * np.eye(n), (m, 1, n, n)))
        return (val, grad, hess, np.concatenate(qs, axis=1),
                np.concatenate(Js, axis=1), np.concatenate(Hs, axis=1))

    def values(self, X, rows=None):
        rows = slice(None) if rows is None else rows
        f, q = self.problem.values(X)
        D = X - self.prox_centers[rows]
        tv = f - np.einsum("ij,ij->i", self.tilts[rows], X)
        val = self.weight * tv + 0.5 * self.prox_weight * np.einsum("ij,ij->i", D, D)
        qs = [q]
        if self.levels is not None:
            qs.append((tv - self.levels[rows])[:, None])
        if self.radius is not None:
            Y = X - self.center
            qs.append((np.einsum("ij,ij->i", Y, Y) - self.radius ** 2)[:, None])
        return val, np.concatenate(qs, axis=1)

    def violation(self, q) -> np.ndarray:
        """Largest constraint violation per row."""
        ne = self.n_eq
        viol = np.zeros(q.shape[0])
        if ne:
            viol = np.abs(q[:, :ne]).max(axis=1)
        if q.shape[1] > ne:
            viol = np.maximum(viol, np.maximum(q[:, ne:], 0).max(axis=1))
        return viol


def _residuals(model: TiltedModel, q):
    """Equality residuals and positive parts of the inequalities."""
    w = q.copy()
    ne = model.n_eq
    w[:, ne:] = np.maximum(q[:, ne:], 0.0)
    return w


def _merit(model, X, rho, rows):
    val, q = model.values(X, rows)
    w = _residuals(model, q)
    return val + rho * np.einsum("ij,ij->i", w, w)


def penalty_descent(model: TiltedModel, X0, rho_schedule, steps: int = 60,
                    grad_tol: float = 1e-12, max_step: float = 1.0) -> np.ndarray:
    """Damped Newton on the quadratic-penalty merit over an increasing schedule.

    Newton directions are convexified by a diagonal shift and clipped to
    length ``max_step`` before the Armijo backtracking.
    """
    X = np.array(X0, float, copy=True)
    m, n = X.shape
    eye = np.eye(n)
    for rho in rho_schedule:
        active = np.arange(m)
        for _ in range(steps):
            if active.size == 0:
                break
            Xa = X[active]
            val, grad, hess, q, J, Hq = model.data(Xa, active)
            w = _residuals(model, q)
            on = (w != 0.0).astype(float)
            g = grad + 2 * rho * np.einsum("ij,ijk->ik", w, J)
            H = hess + 2 * rho * (np.einsum("ij,ijk,ijl->ikl", on, J, J) + np.einsum("ij,ijkl->ikl", w, Hq))
            H = 0.5 * (H + np.swapaxes(H, 1, 2))
            scale = 1.0 + np.abs(H).max(axis=(1, 2))
            lo = np.linalg.eigvalsh(H)[:, 0]
            shift = np.maximum(0.0, 1e-10 * scale - lo)
            H = H + shift[:, None, None] * eye
            d = -np.linalg.solve(H, g[..., None])[..., 0]
            dn = np.linalg.norm(d, axis=1)
            d *= np.minimum(1.0, max_step / np.maximum(dn, 1e-300))[:, None]
            conv = np.linalg.norm(g, axis=1) <= grad_tol * (1.0 + np.abs(val) + rho)
            f0 = val + rho * np.einsum("ij,ij->i", w, w)
            slope = np.einsum("ij,ij->i", g, d)
            alpha = np.ones(active.size)
            todo = ~conv
            for _ls in range(60):
                if not todo.any():
                    break
                idx = np.nonzero(todo)[0]
                trial = Xa[idx] + alpha[idx, None] * d[idx]
                ft = _merit(model, trial, rho, active[idx])
                ok = ft <= f0[idx] + 1e-4 * alpha[idx] * slope[idx]
                todo[idx[ok]] = False
                alpha[idx[~ok]] *= 0.5
            stalled = todo
            step = np.where(stalled, 0.0, alpha)[:, None] * d
            X[active] = Xa + step
            small = np.linalg.norm(step, axis=1) <= 1e-15 * (1.0 + np.linalg.norm(Xa, axis=1))
            active = active[~(conv | stalled | small)]
    return X


@dataclass
class PolishResult:
    """A verified KKT point of the model, or the reason it was rejected."""

    x: np.ndarray
    value: float
    multipliers: np.ndarray
    active: tuple
    violation: float
    kkt_residual: float
    ok: bool
    message: str = ""


def _kkt_multipliers(grad, J, ne, act):
    """Least-squares multipliers with sign constraints on the inequalities."""
    idx = list(act)
    if not idx:
        return np.zeros(0), float(np.linalg.norm(grad))
    cols, owner, sign = [], [], []
    for k, i in enumerate(idx):
        cols.append(J[i])
        owner.append(k)
        sign.append(1.0)
        if i < ne:
            cols.append(-J[i])
            owner.append(k)
            sign.append(-1.0)
    y, res = nnls(np.array(cols).T, -grad)
    lam = np.zeros(len(idx))
    for yk, k, s in zip(y, owner, sign):
        lam[k] += s * yk
    return lam, float(res)


def polish(model: TiltedModel, X0, rows=None, steps: int = 40, active_guess: float = 1e-12,
           feas_tol: float = 1e-8, kkt_tol: float = 1e-6, max_move: float = 1e-3) -> list:
    """Active-set Newton on the KKT systems of a batch of penalty solutions.

    Inequalities within ``active_guess`` of zero start in the working set;
    an inequality whose multiplier turns negative is released and the
    Newton iteration restarts.  Inactive rows of the KKT matrix are
    replaced by ``lambda_i = 0`` so that every row solves a system of the
    same shape; singular systems take the minimum-norm step.
    """
    X0 = np.atleast_2d(np.asarray(X0, float))
    X = X0.copy()
    m, n = X.shape
    rows = np.arange(m) if rows is None else np.asarray(rows)
    ne = model.n_eq
    _, _, _, q, _, _ = model.data(X, rows)
    L = q.shape[1]
    A = np.zeros((m, L), bool)
    A[:, :ne] = True
    A[:, ne:] = q[:, ne:] > -active_guess
    lam = np.zeros((m, L))
    Xbest, lbest = X.copy(), lam.copy()
    todo = np.arange(m)
    for _outer in range(L + 1):
        live = todo.copy()
        best = np.full(m, np.inf)
        for _ in range(steps):
            if live.size == 0:
                break
            val, grad, hess, q, J, Hq = model.data(X[live], rows[live])
            D = A[live].astype(float)
            # degenerate constraints make Newton stall in rounding noise:
            # stop a row as soon as its KKT residual stops decreasing
            res = np.linalg.norm(grad + np.einsum("il,ilk->ik", lam[live] * D, J), axis=1) \
                + np.linalg.norm(q * D, axis=1)
            worse = res >= best[live]
            if worse.any():
                X[live[worse]] = Xbest[live[worse]]
                lam[live[worse]] = lbest[live[worse]]
                keep = ~worse
                live, res, D = live[keep], res[keep], D[keep]
                val, grad, hess, q, J, Hq = (a[keep] for a in (val, grad, hess, q, J, Hq))
                if live.size == 0:
                    break
            best[live] = res
            Xbest[live] = X[live]
            lbest[live] = lam[live]
            k = live.size
            K = np.zeros((k, n + L, n + L))
            K[:, :n, :n] = hess + np.einsum("il,iljk->ijk", lam[live], Hq)
            K[:, :n, n:] = np.swapaxes(J, 1, 2) * D[:, None, :]
            K[:, n:, :n] = J * D[:, :, None]
            K[:, n:, n:] = np.eye(L)[None] * (1.0 - D)[:, :, None]
            rhs = -np.concatenate([grad, q * D], axis=1)
            sol = np.einsum("ijk,ik->ij", np.linalg.pinv(K, rcond=1e-12), rhs)
            dx = sol[:, :n]
            lam[live] = sol[:, n:] * D
            X[live] += dx
            done = np.linalg.norm(dx, axis=1) <= 1e-13 * (1.0 + np.linalg.norm(X[live], axis=1))
            live = live[~done]
        neg = (lam[todo] < -kkt_tol) & A[todo]
        neg[:, :ne] = False
        has = neg.any(axis=1)
        if not has.any():
            break
        for r in todo[has]:
            cand = np.nonzero((lam[r] < -kkt_tol) & A[r])[0]
            cand = cand[cand >= ne]
            A[r, cand[np.argmin(lam[r, cand])]] = False
        todo = todo[has]
    val, grad, hess, q, J, Hq = model.data(X, rows)
    viol = model.violation(q)
    out = []
    for r in range(m):
        act = tuple(int(i) for i in np.nonzero(A[r])[0])
        lr, res = _kkt_multipliers(grad[r], J[r], ne, act)
        full = np.zeros(L)
        full[list(act)] = lr
        moved = float(np.linalg.norm(X[r] - X0[r]))
        ok = viol[r] < feas_tol and res < kkt_tol and moved <= max_move
        msg = "" if ok else ("infeasible" if viol[r] >= feas_tol else
                             "KKT residual too large" if res >= kkt_tol else "polish moved too far")
        out.append(PolishResult(X[r].copy(), float(val[r]), full, act, float(viol[r]), res, ok, msg))
    return out
