import json

import pytest

from cartanlab import expr as ex
from cartanlab.models import ModelError, load_model, parse_model, registry_names


def base_doc():
    return {
        "name": "toy",
        "coordinates": ["u", "v"],
        "domain": {"u": [0.5, 2], "v": [-1, 1]},
        "signature": [1, 1],
        "parameters": {"a": 1},
        "coframe": [["a", "0"], ["0", "u"]],
    }


def test_registry_contents():
    assert registry_names() == ["conformal-test", "minkowski-cartesian", "schwarzschild-cartesian",
                                "schwarzschild-spherical", "sphere-unit"]


@pytest.mark.parametrize("name", registry_names())
def test_round_trip(name, tmp_path):
    m = load_model(name)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(m.to_dict()))
    assert load_model(path) == m
    assert parse_model(json.loads(path.read_text())) == m


def test_schwarzschild_spherical_coframe():
    cf = load_model("schwarzschild-spherical").coframe
    want = ["(1 - 2*m/r)^(1/2)", "(1 - 2*m/r)^(-1/2)", "r", "r*sin(th)"]
    for a, w in enumerate(want):
        assert ex.simplify(ex.add(cf.theta[a][a], ex.mul(-1, ex.parse(w)))) is ex.ZERO
        assert all(cf.theta[a][mu] is ex.ZERO for mu in range(4) if mu != a)


def test_sphere_coframe():
    cf = load_model("sphere-unit").coframe
    assert cf.theta == ((ex.const(1), ex.ZERO), (ex.ZERO, ex.parse("sin(th)")))


def test_cartesian_factorization_reproduces_metric():
    m = load_model("schwarzschild-cartesian")
    cf = m.coframe
    diffs = [ex.add(cf.metric[i][j], ex.mul(-1, m.metric[i][j])) for i in range(4) for j in range(4)]
    assert ex.is_zero_all(diffs, cf.policy()).status == "zero"


def test_parameter_override():
    m = load_model("schwarzschild-spherical", {"m": 0.5})
    assert m.coframe.params["m"] == 0.5
    with pytest.raises(ModelError):
        load_model("schwarzschild-spherical", {"q": 1})


def test_malformed_expression_reports_offset():
    doc = base_doc()
    doc["coframe"][1][1] = "u +* 2"
    with pytest.raises(ModelError, match=r"coframe\[1\]\[1\].*offset 3"):
        parse_model(doc)


def test_singular_coframe_rejected():
    doc = base_doc()
    doc["coframe"] = [["u", "v"], ["2*u", "2*v"]]
    with pytest.raises(ModelError, match="invertible|unusable"):
        parse_model(doc)


def test_constraint_violation_rejected():
    doc = base_doc()
    doc["constraints"] = [{"expr": "u", "min": 5, "max": 6}]
    with pytest.raises(ModelError):
        parse_model(doc)


def test_undeclared_symbol_rejected():
    doc = base_doc()
    doc["coframe"][0][0] = "b"
    with pytest.raises(ModelError, match="undeclared"):
        parse_model(doc)


def test_unknown_model_and_bad_json(tmp_path):
    with pytest.raises(ModelError):
        load_model("no-such-model")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ModelError, match="line 1"):
        load_model(bad)


def test_metric_mismatch_rejected():
    doc = base_doc()
    doc["metric"] = [["2", "0"], ["0", "u^2"]]
    with pytest.raises(ModelError, match="reproduce"):
        parse_model(doc)


def test_einstein_source_declared():
    m = load_model("conformal-test")
    assert m.source == "einstein"
    assert not m.matter_source().is_vacuum
    assert load_model("schwarzschild-spherical").matter_source().is_vacuum
