"""Acceptance criteria, each checked at its stated tolerance and time limit.

Every criterion prints one ``PASS``/``FAIL`` line.  Run directly with
``python tests/test_acceptance.py`` or through pytest (the lines are also
repeated in the terminal summary).
"""

import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from tiltcheck import corpus
from tiltcheck.cli import main as cli_main
from tiltcheck.config import AnalysisConfig
from tiltcheck.expr import eval_point, load_problem
from tiltcheck.oracle import tilt_probe
from tiltcheck.stability.analyze import CERTIFIED, INCONCLUSIVE, analyze
from tiltcheck.stability.cq import cq_suite
from tiltcheck.stability.sets import active_set

HERE = Path(__file__).resolve().parent
RESULTS: list = []


def _check(cond, what):
    if not cond:
        raise AssertionError(what)


def _same_rows(got, want, tol):
    got = [np.asarray(g, float) for g in got]
    if len(got) != len(want):
        return False
    return all(min(np.abs(g - np.asarray(w, float)).max() for g in got) <= tol for w in want)


def criterion_1():
    rep = analyze(corpus.load("ex81"))
    _check(_same_rows(rep.multipliers.vertices, [[0, 0.25, 0.375, 0.375], [0.375, 0.625, 0, 0]], 1e-9),
           "multiplier vertices")
    _check(rep.cone.trivial, "critical cone is not {0}")
    _check(rep.lambda_bar.empty, "extreme directional multiplier set is not empty")
    _check(rep.verdict == CERTIFIED and rep.tilt_bound == 0.0, f"verdict {rep.verdict}, bound {rep.tilt_bound}")
    return "vertices exact, K={0}, empty set, bound 0"


def criterion_2():
    grid = [0.5, 1.01, 2.0, 5.0]
    worst = 0.0
    for a in grid:
        for b in grid:
            rep = analyze(corpus.load("ex82", {"a": a, "b": b}))
            stable = a > 1 and b > 1
            _check((rep.verdict == CERTIFIED) == stable, f"a={a}, b={b}: {rep.verdict}")
            if stable:
                want = 1.0 / min(a - 1, b - 1)
                err = abs(rep.tilt_bound - want) / want
                _check(err <= 1e-6, f"a={a}, b={b}: bound {rep.tilt_bound} vs {want}")
                worst = max(worst, err)
    return f"16 cells, worst relative bound error {worst:.1e}"


def criterion_3():
    p = corpus.load("ex82")
    pd = eval_point(p)
    cfg = AnalysisConfig()
    act = active_set(pd, cfg.active_tol)
    rep = cq_suite(p, pd, act, None, cfg)
    _check(rep.mfcq.status == "fails" and rep.mfcq.certified, f"MFCQ {rep.mfcq.status}")
    _check(rep.crcq.status == "failsWithWitness", f"CRCQ {rep.crcq.status}")
    _check(rep.soscms.status == "holds", f"SOSCMS {rep.soscms.status}")
    return "MFCQ fails (certified), CRCQ failsWithWitness, SOSCMS holds"


def criterion_4():
    p = corpus.load("ex83")
    rep = analyze(p)
    suf = rep.sufficiency
    _check(not suf.holds, "sufficient test holds")
    w = rep.witness
    _check(np.allclose(w["multiplier"], [0, 1], atol=1e-9), f"witness multiplier {w['multiplier']}")
    _check(np.allclose(np.abs(w["w"]), [0, 0, 1], atol=1e-9), f"witness w {w['w']}")
    _check(abs(w["quadratic"]) <= 1e-9, f"quadratic {w['quadratic']}")
    chk = next((c for c in rep.necessity.checks if np.allclose(c.v, [0, 1, 0])), None)
    _check(chk is not None, "direction (0,1,0) not examined")
    _check(not chk.nondegenerate and not chk.regular, "necessity flags")
    _check(rep.verdict == INCONCLUSIVE, f"verdict {rep.verdict}")
    probe = tilt_probe(p)
    _check(probe.verdict == "stableEvidence", f"oracle {probe.verdict}")
    _check(0.7 <= probe.lipschitz <= 1.5, f"Lipschitz estimate {probe.lipschitz}")
    return f"witness ((0,1),(0,0,1),0), flags false/false, oracle Lipschitz {probe.lipschitz:.4f}"


def criterion_5():
    probe = tilt_probe(corpus.load("ex84"))
    _check(probe.verdict == "unstableWitness", f"oracle {probe.verdict}")
    w = probe.witness_record
    u = w.tilt[1]
    _check(abs(w.tilt[0]) == 0 and abs(w.tilt[2]) == 0 and 0.01 <= abs(u) <= 0.1, f"tilt {w.tilt}")
    _check(w.separation >= 1.5 * u * u, f"separation {w.separation} < 1.5 u^2")
    return f"tilt (0,{u:g},0), separation {w.separation:.3e} >= {1.5 * u * u:.3e}"


def criterion_6():
    rep = analyze(corpus.load("ex82r"))
    _check([i + 1 for i in rep.i_plus] == [1, 2, 3, 4], f"union {rep.i_plus}")
    c = rep.crcq
    _check(c is not None and c.holds and rep.crcq_applicable, "constant-rank characterization")
    B = c.record.basis
    _check(B.shape == (4, 1) and np.allclose(np.abs(B[:, 0]), [0, 0, 0, 1]), "subspace is not span{e4}")
    _check(abs(c.record.min_eig - 1.0) <= 1e-9, f"minEig {c.record.min_eig}")
    rec = next(r for r in rep.sufficiency.records if np.allclose(r.multiplier, [0.375, 0.625, 0, 0]))
    _check(rec.min_eig <= rep.sufficiency.threshold, "per-multiplier test passes")
    _check(np.allclose(np.abs(rec.witness), [0, 1, 0, 0]), f"w {rec.witness}")
    H = eval_point(corpus.load("ex82r")).lagrangian_hessian(rec.multiplier)
    _check(abs(rec.witness @ H @ rec.witness) <= 1e-12, "quadratic at w")
    return "union {1,2,3,4}, span{e4} with minEig 1, per-multiplier test fails at w=(0,1,0,0)"


def criterion_7():
    with tempfile.TemporaryDirectory() as tmp:
        dest = Path(tmp) / "ex83_perturbed.nlp"
        code = cli_main(["perturb", "corpus/ex83.nlp", "-o", str(dest), "--quiet"])
        _check(code == 0, f"exit code {code}")
        q = load_problem(dest)
    a, b = eval_point(corpus.load("ex83")), eval_point(q)
    err = max(np.abs(a.q - b.q).max(), np.abs(a.jacobian - b.jacobian).max(),
              np.abs(a.constraint_hessians - b.constraint_hessians).max())
    _check(err <= 1e-8, f"second-order mismatch {err}")
    probe = tilt_probe(q)
    _check(probe.verdict == "unstableWitness", f"oracle {probe.verdict}")
    return f"match error {err:.1e}, oracle unstableWitness"


PROPERTY_TESTS = [
    "test_expr.py::test_ad_matches_finite_differences",
    "test_polyhedra.py::test_lp_optimum_equals_vertex_maximum",
    "test_polyhedra.py::test_minkowski_reconstruction",
    "test_sets.py::test_optimal_face_invariant_under_positive_scaling",
    "test_second_order.py::test_form_constancy_on_constant_rank_entries",
]


def criterion_8():
    args = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
            *[str(HERE / t) for t in PROPERTY_TESTS]]
    res = subprocess.run(args, capture_output=True, text=True, cwd=HERE)
    last = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    _check(res.returncode == 0, last)
    return last.strip("= ")


CRITERIA = [
    (1, "ex81 vertices, trivial cone, certified with bound 0", criterion_1, 1.0),
    (2, "ex82 sweep over (a,b): certified iff a>1 and b>1 with exact bound", criterion_2, 5.0),
    (3, "ex82 qualification suite", criterion_3, 2.0),
    (4, "ex83 failing witness, necessity flags, inconclusive, oracle modulus", criterion_4, 10.0),
    (5, "ex84 oracle witness of two minimizers", criterion_5, 10.0),
    (6, "ex82r constant-rank characterization vs per-multiplier test", criterion_6, 2.0),
    (7, "perturbation of ex83: second-order match and oracle instability", criterion_7, 15.0),
    (8, "property suites", criterion_8, 30.0),
]


def run_criterion(k):
    num, title, fn, limit = CRITERIA[k - 1]
    t0 = time.perf_counter()
    try:
        detail = fn()
        ok = True
    except AssertionError as err:
        detail, ok = f"failed: {err}", False
    dt = time.perf_counter() - t0
    if ok and dt > limit:
        ok, detail = False, f"{detail}; took {dt:.2f}s, limit {limit:g}s"
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {title} [{dt:.2f}s / {limit:g}s] {detail}"
    print(line)
    RESULTS.append(line)
    return ok, line


def test_criterion_1():
    ok, line = run_criterion(1)
    assert ok, line


def test_criterion_2():
    ok, line = run_criterion(2)
    assert ok, line


def test_criterion_3():
    ok, line = run_criterion(3)
    assert ok, line


def test_criterion_4():
    ok, line = run_criterion(4)
    assert ok, line


def test_criterion_5():
    ok, line = run_criterion(5)
    assert ok, line


def test_criterion_6():
    ok, line = run_criterion(6)
    assert ok, line


def test_criterion_7():
    ok, line = run_criterion(7)
    assert ok, line


def test_criterion_8():
    ok, line = run_criterion(8)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(k)[0] for k in range(1, len(CRITERIA) + 1)]
    sys.exit(0 if all(results) else 1)
