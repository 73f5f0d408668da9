import numpy as np
import pytest

from tiltcheck import corpus
from tiltcheck.config import TiltProbeConfig
from tiltcheck.expr import parse_problem
from tiltcheck.oracle import INCONCLUSIVE, STABLE, UNSTABLE, solve_tilted, tilt_grid, tilt_probe
from tiltcheck.stability.analyze import CERTIFIED, NOT_CERTIFIED, analyze

QUICK = dict(grid=3, starts=32)


def test_config_defaults_and_validation():
    cfg = TiltProbeConfig()
    assert cfg.delta == pytest.approx(0.025) and cfg.cluster_tol == pytest.approx(5e-5)
    with pytest.raises(ValueError):
        TiltProbeConfig(gamma=0.1, delta=0.2)
    with pytest.raises(ValueError):
        TiltProbeConfig(starts=0)


def test_tilt_grid():
    T = tilt_grid(2, 0.1, 5, 2000)
    assert T.shape == (25, 2) and np.all(T[0] == 0)
    assert np.all(np.diff(np.linalg.norm(T, axis=1)) >= -1e-15)
    assert tilt_grid(4, 0.1, 9, 2000).shape[0] <= 2000


def test_ex84_two_clusters():
    u = 0.05
    rec = solve_tilted(corpus.load("ex84"), [0, u, 0])
    assert rec.status == "multi"
    pts = np.array([c.point for c in rec.clusters])
    for sign in (1, -1):
        d = np.linalg.norm(pts - [0, u, sign * u ** 2], axis=1)
        assert d.min() <= 1e-6
    assert rec.separation >= 1.5 * u ** 2


def test_ex81_zero_tilt_single_cluster():
    rec = solve_tilted(corpus.load("ex81"), [0, 0, 0])
    assert rec.status == "single" and np.linalg.norm(rec.minimizer) <= 1e-8


def test_unconstrained_quadratic_tilt():
    p = parse_problem('dimension = 2\nobjective = "0.5*x1^2 + 0.5*x2^2"\npoint = [0, 0]\n')
    v = np.array([0.1, -0.2])
    rec = solve_tilted(p, v)
    assert rec.status == "single" and np.allclose(rec.minimizer, v, atol=1e-9)


def test_reported_minimizers_are_verified():
    rep = tilt_probe(corpus.load("ex83"), TiltProbeConfig(**QUICK))
    for r in rep.records:
        for c in r.clusters:
            assert c.violation < 1e-8 and c.kkt_residual < 1e-6


def test_determinism():
    p = corpus.load("ex82")
    a = tilt_probe(p, TiltProbeConfig(**QUICK))
    b = tilt_probe(p, TiltProbeConfig(**QUICK))
    assert a.verdict == b.verdict and a.lipschitz == b.lipschitz
    for r, s in zip(a.records, b.records):
        assert len(r.clusters) == len(s.clusters)
        for c, d in zip(r.clusters, s.clusters):
            assert np.array_equal(c.point, d.point)


def test_ex83_stable_modulus_near_one():
    rep = tilt_probe(corpus.load("ex83"))
    assert rep.verdict == STABLE and 0.7 <= rep.lipschitz <= 1.5


def test_ex84_unstable():
    rep = tilt_probe(corpus.load("ex84"))
    assert rep.verdict == UNSTABLE
    w = rep.witness_record
    assert w.separation > 10 * rep.config.cluster_tol
    vals = [c.value for c in w.clusters]
    assert max(vals) - min(vals) <= rep.config.tie_tol * (1 + abs(min(vals)))


def test_ex82_modulus_matches_bound():
    rep = tilt_probe(corpus.load("ex82"))
    assert rep.verdict == STABLE and 0.8 <= rep.lipschitz <= 1.3


@pytest.mark.parametrize("name, params, cfg", [
    ("ex81", {}, QUICK),
    ("ex82", {}, dict(grid=5, starts=32)),
    ("ex82", {"a": 1.5, "b": 3.0}, dict(grid=5, starts=32)),
    ("ex82", {"a": 0.5, "b": 2.0}, dict(grid=5, starts=32)),
    ("ex82r", {}, QUICK),
    ("ex83", {}, QUICK),
    ("ex84", {}, dict(grid=5, starts=32)),
])
def test_oracle_agrees_with_analyzer(name, params, cfg):
    p = corpus.load(name, params or None)
    rep = analyze(p)
    probe = tilt_probe(p, TiltProbeConfig(**cfg))
    if rep.verdict == CERTIFIED:
        assert probe.verdict == STABLE
        assert probe.lipschitz <= 1.5 * rep.tilt_bound + 0.1
    elif rep.verdict == NOT_CERTIFIED:
        assert probe.verdict == UNSTABLE
    else:
        assert probe.verdict in (STABLE, UNSTABLE, INCONCLUSIVE)
