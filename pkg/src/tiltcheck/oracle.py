"""Brute-force tilt oracle: solve tilted problems on a grid and inspect the argmin map.

For each tilt ``t`` on a grid in ``[-delta, delta]^n`` the problem

    minimize f(x) - <t, x>  subject to the constraints and ||x - xbar|| <= gamma

is solved from many deterministic starts.  Verified local solutions whose
values tie with the best one are clustered; two well-separated clusters at
the same tilt disprove single-valuedness, and otherwise the largest
difference quotient over tilt pairs estimates the Lipschitz modulus.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .config import TiltProbeConfig
from .expr import ProblemSpec, eval_point
from .solver import TiltedModel, penalty_descent, polish
from .stability.sampling import ball_points

__all__ = ["Cluster", "TiltRecord", "TiltProbeReport", "tilt_grid", "solve_tilted", "tilt_probe"]

STABLE, UNSTABLE, INCONCLUSIVE = "stableEvidence", "unstableWitness", "inconclusive"


@dataclass
class Cluster:
    point: np.ndarray
    value: float
    size: int
    kkt_residual: float
    violation: float


@dataclass
class TiltRecord:
    """Solutions found for one tilt.

    ``status`` is ``single``, ``multi`` (well-separated clusters),
    ``ambiguous`` (several clusters closer than the witness threshold) or
    ``failed`` (no start produced a verified solution).
    """

    tilt: np.ndarray
    clusters: list
    value: float
    status: str
    separation: float = 0.0
    rejected: int = 0

    @property
    def minimizer(self) -> np.ndarray | None:
        return self.clusters[0].point if len(self.clusters) == 1 else None


@dataclass
class TiltProbeReport:
    verdict: str
    records: list
    lipschitz: float | None
    lipschitz_pair: tuple | None
    witness: int | None
    config: TiltProbeConfig
    failures: int = 0
    ambiguous: int = 0
    notes: list = field(default_factory=list)

    @property
    def witness_record(self) -> TiltRecord | None:
        return None if self.witness is None else self.records[self.witness]


def tilt_grid(n: int, delta: float, grid: int, cap: int) -> np.ndarray:
    """Tilts on the uniform grid of ``[-delta, delta]^n``, ordered by norm.

    When the full grid exceeds ``cap`` the number of points per axis is
    reduced until it fits.
    """
    g = grid
    while g > 1 and g ** n > cap:
        g -= 1
    axis = np.linspace(-delta, delta, g) if g > 1 else np.zeros(1)
    axis[np.abs(axis) < 1e-15 * delta] = 0.0
    T = np.array(list(itertools.product(axis, repeat=n)))
    order = sorted(range(len(T)), key=lambda k: (round(float(np.linalg.norm(T[k])), 14), tuple(-T[k])))
    return T[order]


def _starts(problem: ProblemSpec, cfg: TiltProbeConfig) -> np.ndarray:
    pts = problem.point + cfg.gamma * ball_points(problem.dimension, max(cfg.starts - 1, 1))
    return np.vstack([problem.point[None], pts])[: cfg.starts]


def _cluster(results, tol):
    """Greedy clustering of solutions in order of increasing value."""
    clusters = []
    for pr in sorted(results, key=lambda r: r.value):
        for c in clusters:
            if np.linalg.norm(c.point - pr.x) <= tol:
                c.size += 1
                break
        else:
            clusters.append(Cluster(pr.x, pr.value, 1, pr.kkt_residual, pr.violation))
    clusters.sort(key=lambda c: tuple(c.point))
    return clusters


def _records(problem: ProblemSpec, tilts: np.ndarray, cfg: TiltProbeConfig) -> list:
    S = _starts(problem, cfg)
    s = len(S)
    T = np.repeat(tilts, s, axis=0)
    X0 = np.tile(S, (len(tilts), 1))
    opts = dict(steps=cfg.polish_steps, feas_tol=cfg.feas_tol, kkt_tol=cfg.kkt_tol)
    model = TiltedModel(problem, T, center=problem.point, radius=cfg.gamma)
    X = penalty_descent(model, X0, cfg.rho_schedule, cfg.newton_steps)
    found = polish(model, X, **opts)
    levels = np.full(len(tilts), np.inf)
    for r, pr in enumerate(found):
        if pr.ok:
            levels[r // s] = min(levels[r // s], pr.value)

    # A penalty method picks one point of a non-isolated solution set, so
    # the first few starts are also projected onto the level set of the best value.
    first = np.tile(np.arange(s) < cfg.explore_starts, len(tilts))
    rows = np.nonzero(np.isfinite(np.repeat(levels, s)) & first)[0]
    explored = [None] * len(T)
    if rows.size:
        W = np.array([found[r].x if found[r].ok else X[r] for r in rows])
        probe = TiltedModel(problem, T[rows], weight=0.0, prox_weight=1.0, prox_centers=X0[rows],
                            center=problem.point, radius=cfg.gamma, levels=levels[rows // s])
        Y = penalty_descent(probe, W, cfg.rho_schedule, cfg.newton_steps)
        for r, pr in zip(rows, polish(model, Y, rows, max_move=cfg.gamma, **opts)):
            explored[r] = pr

    records = []
    for k, t in enumerate(tilts):
        cands = [found[r] for r in range(k * s, (k + 1) * s)]
        cands += [explored[r] for r in range(k * s, (k + 1) * s) if explored[r] is not None]
        good = [pr for pr in cands if pr.ok]
        rejected = len(cands) - len(good)
        if not good:
            records.append(TiltRecord(t, [], math.nan, "failed", rejected=rejected))
            continue
        vals = np.array([pr.value for pr in good])
        best = vals.min()
        keep = [pr for pr, v in zip(good, vals) if v <= best + cfg.tie_tol * (1.0 + abs(best))]
        clusters = _cluster(keep, cfg.cluster_tol)
        sep = 0.0
        for a, b in itertools.combinations(clusters, 2):
            sep = max(sep, float(np.linalg.norm(a.point - b.point)))
        if len(clusters) == 1:
            status = "single"
        elif sep > 10 * cfg.cluster_tol:
            status = "multi"
        else:
            status = "ambiguous"
        records.append(TiltRecord(t, clusters, float(best), status, sep, rejected))
    return records


def solve_tilted(problem: ProblemSpec, vstar, config: TiltProbeConfig | None = None) -> TiltRecord:
    """Minimizer clusters of the tilted problem for one tilt ``vstar``."""
    cfg = config or TiltProbeConfig()
    t = np.asarray(vstar, float).reshape(1, problem.dimension)
    return _records(problem, t, cfg)[0]


def _lipschitz(records, min_sep):
    ids = [k for k, r in enumerate(records) if r.status == "single"]
    single = [records[k] for k in ids]
    if len(single) < 2:
        return None, None
    T = np.array([r.tilt for r in single])
    X = np.array([r.minimizer for r in single])
    best, pair = 0.0, None
    for a in range(len(single) - 1):
        dt = np.linalg.norm(T[a + 1:] - T[a], axis=1)
        dx = np.linalg.norm(X[a + 1:] - X[a], axis=1)
        ok = dt >= min_sep
        if not ok.any():
            continue
        ratio = np.where(ok, dx / np.where(ok, dt, 1.0), -1.0)
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, pair = float(ratio[k]), (a, a + 1 + k)
    if pair is None:
        return 0.0, None
    return best, (ids[pair[0]], ids[pair[1]])


def tilt_probe(problem: ProblemSpec, config: TiltProbeConfig | None = None) -> TiltProbeReport:
    """Run the oracle over the tilt grid and classify the argmin map.

    The verdict is ``unstableWitness`` when some tilt has two tied
    clusters more than ten cluster tolerances apart, ``inconclusive`` when
    some tilt failed or was ambiguous, and ``stableEvidence`` otherwise.
    """
    cfg = config or TiltProbeConfig()
    eval_point(problem)  # domain check at the reference point
    tilts = tilt_grid(problem.dimension, cfg.delta, cfg.grid, cfg.max_tilts)
    records = _records(problem, tilts, cfg)
    failures = sum(r.status == "failed" for r in records)
    ambiguous = sum(r.status == "ambiguous" for r in records)
    multi = [k for k, r in enumerate(records) if r.status == "multi"]
    notes = []
    if multi:
        # records are sorted by tilt norm, so the first one is the smallest witness
        witness = multi[0]
        return TiltProbeReport(UNSTABLE, records, None, None, witness, cfg, failures, ambiguous,
                               [f"{len(multi)} tilt(s) with separated minimizer clusters"])
    lip, pair = _lipschitz(records, cfg.lipschitz_min_separation * cfg.delta)
    if failures or ambiguous:
        notes.append(f"{failures} failed and {ambiguous} ambiguous tilt(s)")
        verdict = INCONCLUSIVE
    else:
        verdict = STABLE
    return TiltProbeReport(verdict, records, lip, pair, None, cfg, failures, ambiguous, notes)
