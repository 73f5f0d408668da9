import numpy as np
import pytest

from tiltcheck import corpus
from tiltcheck.stability.analyze import analyze
from tiltcheck.stability.cq import cq_suite

from conftest import build, sorted_rows


def test_five_entries():
    assert corpus.names() == ("ex81", "ex82", "ex82r", "ex83", "ex84")


def test_unknown_entry():
    with pytest.raises(KeyError):
        corpus.text("bogus")


@pytest.mark.parametrize("name", corpus.names())
def test_metadata_matches_analysis(name):
    meta = corpus.metadata(name)
    assert meta["name"] == name
    exp = meta["expected"]
    rep = analyze(corpus.load(name))
    assert rep.verdict == exp["verdict"]
    if "tiltBound" in exp:
        assert rep.tilt_bound == pytest.approx(exp["tiltBound"], rel=1e-9, abs=1e-12)
    if "vertices" in exp:
        assert sorted_rows(rep.multipliers.vertices) == sorted_rows(exp["vertices"])
    if "lambdaBarE" in exp:
        assert sorted_rows(rep.lambda_bar.multipliers) == sorted_rows(exp["lambdaBarE"])
    if "iPlusUnion" in exp:
        assert [i + 1 for i in rep.i_plus] == exp["iPlusUnion"]
    if "cqs" in exp:
        statuses = {r.name: r.status for r in rep.cqs.records()}
        for k, v in exp["cqs"].items():
            assert statuses[k] == v


def test_params_of_ex82_are_overridable():
    assert corpus.load("ex82").params == {"a": 2.0, "b": 2.0}
    assert corpus.load("ex82", {"a": 5.0}).params["a"] == 5.0
