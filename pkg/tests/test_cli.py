import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from tiltcheck import corpus
from tiltcheck.cli import main
from tiltcheck.expr import eval_point, load_problem

ROOT = Path(__file__).resolve().parents[1]
SCHEMA = json.loads((ROOT / "schema" / "report.schema.json").read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_ex81_text(capsys):
    code, out, _ = run(capsys, "analyze", "corpus/ex81.nlp")
    assert code == 0
    assert "verdict: TILT_STABLE_CERTIFIED" in out and "tilt bound: 0 (exact)" in out
    # sections appear in pipeline order
    keys = ["problem:", "feasibility:", "first order:", "multipliers:", "constraint qualifications:",
            "critical cone:", "extreme directional multipliers:", "second order:", "verdict:"]
    pos = [out.index(k) for k in keys]
    assert pos == sorted(pos)


def test_analyze_ex82_params(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(capsys, "analyze", "corpus/ex82.nlp", "--param", "a=0.5", "--param", "b=2",
                       "--json", str(path))
    assert code == 0
    d = json.loads(path.read_text())
    jsonschema.validate(d, SCHEMA)
    rec = next(r for r in d["secondOrder"]["records"] if r["multiplier"] == [1.0, 0.0, 0.0])
    assert rec["minEig"] == pytest.approx(-0.5)
    assert d["problem"]["params"] == {"a": 0.5, "b": 2.0}


def test_analyze_json_stdout(capsys):
    code, out, _ = run(capsys, "analyze", "ex83", "--json", "-")
    assert code == 0
    d = json.loads(out)
    assert d["verdict"] == "INCONCLUSIVE"
    jsonschema.validate(d, SCHEMA)


def test_missing_file(capsys):
    code, _, err = run(capsys, "analyze", "missing.nlp")
    assert code == 1 and "missing.nlp" in err


def test_parse_error_reports_position(capsys, tmp_path):
    f = tmp_path / "bad.nlp"
    f.write_text('dimension = 2\nobjective = "x1 +* x2"\npoint = [0, 0]\n')
    code, _, err = run(capsys, "analyze", str(f))
    assert code == 1 and ":2:" in err


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "analyze", "ex81", "--param", "a")[0] == 1
    assert run(capsys, "analyze")[0] == 1
    assert run(capsys, "analyze", "ex82", "--param", "x1=3")[0] == 1


def test_infeasible_exit_code(capsys, tmp_path):
    f = tmp_path / "inf.nlp"
    f.write_text('dimension = 1\nobjective = "x1"\ninequalities = ["1 - x1"]\npoint = [0]\n')
    assert run(capsys, "analyze", str(f))[0] == 2
    assert run(capsys, "cqs", str(f))[0] == 2
    assert run(capsys, "oracle", str(f))[0] == 2
    f.write_text('dimension = 1\nobjective = "-x1"\ninequalities = ["-x1"]\npoint = [0]\n')
    assert run(capsys, "analyze", str(f))[0] == 2


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kappa": 0.5, "cq_samples": 16}))
    code, out, _ = run(capsys, "analyze", "ex82", "--config", str(cfg), "--json", "-")
    d = json.loads(out)
    assert d["config"]["kappa"] == 0.5 and d["config"]["cq_samples"] == 16
    cfg.write_text(json.dumps({"no_such_field": 1}))
    assert run(capsys, "analyze", "ex82", "--config", str(cfg))[0] == 1


def test_cqs_ex82(capsys):
    code, out, _ = run(capsys, "cqs", "corpus/ex82.nlp", "--json", "-")
    d = json.loads(out)
    assert code == 0
    assert d["cqs"]["MFCQ"]["status"] == "fails"
    assert d["cqs"]["CRCQ"]["status"] == "failsWithWitness"
    assert d["cqs"]["SOSCMS"]["status"] == "holds"
    assert d["cqs"]["CRCQ"]["witness"]["subset"] == [1, 2]


def test_cqs_ex83_and_partition(capsys):
    code, out, _ = run(capsys, "cqs", "ex83", "--partition", "I1=1", "--json", "-")
    d = json.loads(out)
    assert code == 0 and d["cqs"]["MFCQ"]["status"] == "holds"
    assert d["config"]["partition_i1"] == [1]
    assert run(capsys, "cqs", "ex83", "--partition", "Q=1")[0] == 1


def test_cqs_without_constraints(capsys, tmp_path):
    f = tmp_path / "free.nlp"
    f.write_text('dimension = 2\nobjective = "x1^2 + x2^2"\npoint = [0, 0]\n')
    code, out, _ = run(capsys, "cqs", str(f), "--json", "-")
    assert code == 0
    assert {v["status"] for v in json.loads(out)["cqs"].values()} == {"holds"}


def test_oracle_ex84(capsys):
    code, out, _ = run(capsys, "oracle", "corpus/ex84.nlp", "--delta", "0.05", "--grid", "3",
                       "--json", "-")
    d = json.loads(out)
    assert code == 0 and d["verdict"] == "unstableWitness"
    w = d["witness"]
    assert np.allclose(w["tilt"], [0, 0.05, 0])
    pts = np.array([c["point"] for c in w["clusters"]])
    for sign in (1, -1):
        assert np.linalg.norm(pts - [0, 0.05, sign * 0.0025], axis=1).min() <= 1e-6


def test_oracle_ex81_text(capsys):
    code, out, _ = run(capsys, "oracle", "ex81", "--grid", "3", "--samples", "16")
    assert code == 0 and out.startswith("oracle: stableEvidence")
    assert "16 starts" in out


def test_perturb_ex83(capsys, tmp_path):
    dest = tmp_path / "q.nlp"
    code, out, _ = run(capsys, "perturb", "corpus/ex83.nlp", "-o", str(dest))
    assert code == 0
    assert "second-order match: PASS" in out
    for key in ("v (0, 1, 0)", "z (0, 1, 0)", "r 0.25", "I-hat {1, 2}"):
        assert key in out
    q = load_problem(dest)
    a, b = eval_point(corpus.load("ex83")), eval_point(q)
    assert np.allclose(a.q, b.q, atol=1e-8) and np.allclose(a.jacobian, b.jacobian, atol=1e-8)
    assert np.allclose(a.constraint_hessians, b.constraint_hessians, atol=1e-8)


def test_perturb_ex81_fails(capsys, tmp_path):
    code, _, err = run(capsys, "perturb", "corpus/ex81.nlp", "-o", str(tmp_path / "x.nlp"))
    assert code == 2 and "empty" in err
    assert not (tmp_path / "x.nlp").exists()


def test_perturb_explicit_data(capsys, tmp_path):
    dest = tmp_path / "q.nlp"
    code, out, _ = run(capsys, "perturb", "ex83", "-o", str(dest), "--multiplier", "0,1",
                       "--w", "0,0,1", "--v", "0,1,0", "--json", "-")
    d = json.loads(out)
    assert code == 0 and d["secondOrderMatch"]["pass"] and d["iHat"] == [1, 2]
    code, _, _ = run(capsys, "perturb", "ex83", "-o", str(dest), "--multiplier", "1,0",
                     "--w", "0,1,0", "--v", "0,1,0")
    assert code == 2
    assert run(capsys, "perturb", "ex83", "--multiplier", "0,1")[0] == 1


def test_corpus_listing(capsys):
    code, out, _ = run(capsys, "corpus")
    assert code == 0
    assert [l.split()[0] for l in out.strip().splitlines()] == list(corpus.names())


def test_corpus_emit(capsys, tmp_path):
    code, out, _ = run(capsys, "corpus", "ex84", "--emit", str(tmp_path))
    assert code == 0
    text = (tmp_path / "ex84.nlp").read_text()
    assert '"x1 - x2^4 + x3^2"' in text
    meta = json.loads((tmp_path / "ex84.json").read_text())
    assert meta["expected"]["oracle"]["verdict"] == "unstableWitness"


def test_corpus_unknown(capsys):
    code, _, err = run(capsys, "corpus", "bogus")
    assert code == 1 and "bogus" in err
