import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartanlab.checks import (CHECKS, CheckError, CheckOptions, canonical_json, emit_report,
                              run_check)
from cartanlab.frames import DimensionError
from cartanlab.models import parse_model, load_model

# every required item passes except the plus-sign strain relation
EXPECTED = {
    ("sphere-unit", c): True for c in ("curvature", "torsion", "nonmetricity", "transport",
                                       "holonomy", "quad-torsion")
}
EXPECTED.update({("schwarzschild-spherical", c): True for c in CHECKS if c != "strain"})
EXPECTED.update({("sphere-unit", "strain"): False, ("schwarzschild-spherical", "strain"): False,
                 ("minkowski-cartesian", "strain"): True})


@pytest.mark.parametrize("model_name, check", sorted(EXPECTED))
def test_registry_check_outcomes(model_name, check):
    rep = run_check(model_name, check, CheckOptions(random_forms=10))
    assert rep.passed is EXPECTED[(model_name, check)]
    assert [i.name for i in sorted(rep.items, key=lambda i: i.name)] == \
        [c["name"] for c in rep.to_dict()["checks"]]


def test_dimension_and_name_errors():
    with pytest.raises(DimensionError):
        run_check("sphere-unit", "field-equations")
    with pytest.raises(CheckError):
        run_check("sphere-unit", "speed")


def test_expectation_with_unknown_quantity_rejected():
    doc = load_model("sphere-unit").to_dict()
    doc["expectations"] = {"curvature": {"weyl[0]": "0"}}
    with pytest.raises(CheckError, match="weyl"):
        run_check(parse_model(doc), "curvature")


def test_wrong_expectation_fails_the_report():
    doc = load_model("sphere-unit").to_dict()
    doc["expectations"] = {"curvature": {"scalar": "-2"}}
    rep = run_check(parse_model(doc), "curvature")
    assert not rep.passed
    assert rep.item("expect:scalar").verdict.status == "nonzero"


def test_seed_changes_sample_points_but_not_verdicts():
    a = run_check("schwarzschild-spherical", "equivalence", CheckOptions(seed=1)).to_dict()
    b = run_check("schwarzschild-spherical", "equivalence", CheckOptions(seed=2)).to_dict()
    assert a["passed"] and b["passed"]
    assert a["options"]["seed"] != b["options"]["seed"]


def test_csv_and_json_agree_on_statuses():
    rep = run_check("sphere-unit", "holonomy")
    doc = json.loads(emit_report(rep))
    lines = emit_report(rep, "csv-summary").decode().splitlines()[1:]
    assert [line.split(",")[1] for line in lines] == [c["verdict"]["status"] for c in doc["checks"]]


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=8),
    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=5), kids, max_size=4),
    max_leaves=12,
)


@settings(max_examples=150, deadline=None)
@given(json_values)
def test_canonical_json_round_trips_exactly(value):
    text = canonical_json(value)
    back = json.loads(text)
    assert canonical_json(back) == text
    assert back == json.loads(json.dumps(value, sort_keys=True))


def test_non_finite_floats_become_null():
    assert canonical_json([math.inf, -math.inf, math.nan]) == "[null, null, null]"
