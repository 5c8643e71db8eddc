import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from shared.schemas.document import (
    CheckEntry,
    FieldSource,
    IsaacsNode,
    ProblemDocument,
    ResolventSection,
)

PROBLEMS = sorted(Path(__file__).resolve().parents[1].joinpath("problems").glob("*.json"))


def _doc(**overrides) -> dict:
    data = {
        "name": "unit",
        "dim": 1,
        "operator": {"kind": "drift", "b": ["-x1"]},
    }
    data.update(overrides)
    return data


def _chain(**overrides) -> dict:
    data = {
        "lam": 1.0,
        "explicit": {
            "states": [0.0, 1.0],
            "generators": [{"rates": [[-1.0, 1.0], [1.0, -1.0]]}],
        },
        "h1": [0.0, 1.0],
    }
    data.update(overrides)
    return data


@pytest.mark.parametrize("path", PROBLEMS, ids=lambda p: p.stem)
def test_sample_problems_validate(path):
    doc = ProblemDocument.model_validate(json.loads(path.read_text(encoding="utf-8")))
    assert doc.name == path.stem


def test_defaults():
    doc = ProblemDocument.model_validate(_doc())
    assert doc.version == 1
    assert doc.coupling.rule == "synchronous"
    assert doc.penalty.collection == 1
    assert doc.containment.kind == "log"
    assert doc.output.report == "report.json"
    assert doc.seed_or(9) == 9
    assert ProblemDocument.model_validate(_doc(seed=4)).seed_or(9) == 4


def test_field_shorthand():
    assert FieldSource.model_validate("x1*x1").value == "x1*x1"
    assert FieldSource.model_validate(2).value == "2.0"
    with pytest.raises(ValidationError):
        FieldSource.model_validate(True)


def test_hessian_must_be_square():
    with pytest.raises(ValidationError, match="square"):
        FieldSource.model_validate({"value": "x1", "hessian": [["0", "0"], ["0"]]})
    with pytest.raises(ValidationError, match="disagree"):
        FieldSource.model_validate({"value": "x1", "gradient": ["1", "0"], "hessian": [["0"]]})


def test_grammar_errors_carry_a_path():
    with pytest.raises(ValidationError) as excinfo:
        ProblemDocument.model_validate(_doc(operator={"kind": "drift", "b": ["-x1 +"]}))
    assert excinfo.value.errors()[0]["loc"][0] == "operator"


def test_drift_uses_state_variables_only():
    with pytest.raises(ValidationError, match="x variables"):
        ProblemDocument.model_validate(_doc(operator={"kind": "drift", "b": ["p1"]}))
    with pytest.raises(ValidationError, match="p1..pq only"):
        ProblemDocument.model_validate(
            _doc(operator={"kind": "drift", "b": ["0"], "hconv": "x1*p1"})
        )


def test_index_beyond_dimension():
    with pytest.raises(ValidationError, match="beyond dimension"):
        ProblemDocument.model_validate(_doc(operator={"kind": "drift", "b": ["-x2"]}))
    doc = ProblemDocument.model_validate(
        _doc(dim=2, operator={"kind": "drift", "b": ["-x1", "-x2"]})
    )
    assert doc.dim == 2


def test_jump_measure_inputs():
    with pytest.raises(ValidationError, match="needs eta"):
        ProblemDocument.model_validate(_doc(operator={"kind": "jump", "measure": "map"}))
    with pytest.raises(ValidationError, match="at least one atom"):
        ProblemDocument.model_validate(_doc(operator={"kind": "jump"}))


def test_isaacs_tables():
    still = {"kind": "drift", "b": ["0"]}
    node = {
        "kind": "isaacs",
        "theta1": ["a", "b"],
        "theta2": ["c"],
        "components": [[still], [still]],
        "cost": [["0"], [None]],
    }
    assert IsaacsNode.model_validate(node).cost == [["0"], [None]]
    with pytest.raises(ValidationError, match="2x1"):
        IsaacsNode.model_validate({**node, "components": [[still]]})
    with pytest.raises(ValidationError, match="do not nest"):
        IsaacsNode.model_validate(
            {**node, "theta1": ["a"], "components": [[node]], "cost": None}
        )
    with pytest.raises(ValidationError, match="synchronously"):
        ProblemDocument.model_validate(_doc(operator=node, coupling={"rule": "independent"}))


def test_coupling_rules():
    with pytest.raises(ValidationError, match="needs eta"):
        ProblemDocument.model_validate(_doc(coupling={"rule": "map"}))
    with pytest.raises(ValidationError, match="needs rows"):
        ProblemDocument.model_validate(_doc(coupling={"rule": "table"}))
    rows = [{"z1": [1.0, 0.0], "z2": [1.0, 0.0], "w": 1.0}]
    with pytest.raises(ValidationError, match="document dimension"):
        ProblemDocument.model_validate(_doc(coupling={"rule": "table", "rows": rows}))


def test_penalty_radii_ordered():
    with pytest.raises(ValidationError, match="R < Rp < Rpp"):
        ProblemDocument.model_validate(_doc(penalty={"R": 4.0, "Rp": 3.0, "Rpp": 5.0}))


def test_resolvent_lambda_must_be_positive():
    with pytest.raises(ValidationError):
        ProblemDocument.model_validate(_doc(resolvent=_chain(lam=0.0)))


def test_resolvent_needs_one_source():
    both = _chain(discretize={"radius": 1.0, "mesh": 0.5})
    with pytest.raises(ValidationError, match="exactly one"):
        ResolventSection.model_validate(both)
    with pytest.raises(ValidationError, match="exactly one"):
        ResolventSection.model_validate({"lam": 1.0, "h1": "0"})


def test_explicit_h_length():
    with pytest.raises(ValidationError, match="entries for 2 states"):
        ResolventSection.model_validate(_chain(h1=[0.0, 1.0, 2.0]))


def test_discretized_h_length():
    resolvent = {"lam": 1.0, "discretize": {"radius": 1.0, "mesh": 0.5}, "h1": [0.0] * 4}
    with pytest.raises(ValidationError, match="resolvent.h1 has 4 entries for 5 states"):
        ProblemDocument.model_validate(_doc(resolvent=resolvent))
    ok = {**resolvent, "h1": [0.0] * 5}
    assert ProblemDocument.model_validate(_doc(resolvent=ok)).resolvent.h1 == [0.0] * 5


def test_explicit_chain_shapes():
    chain = _chain()
    chain["explicit"]["theta1"] = ["a", "b"]
    with pytest.raises(ValidationError, match=r"no generator for control pair \(1, 0\)"):
        ResolventSection.model_validate(chain)
    bad = _chain()
    bad["explicit"]["generators"] = [{"rates": [[0.0]]}]
    with pytest.raises(ValidationError, match="must be 2x2"):
        ResolventSection.model_validate(bad)


def test_identity_mu_below_lambda():
    with pytest.raises(ValidationError, match="identity_mu"):
        ResolventSection.model_validate(_chain(identity_mu=1.0))
    assert ResolventSection.model_validate(_chain(identity_mu=0.5)).identity_mu == 0.5


def _doubling(**overrides) -> dict:
    data = {
        "eps": 0.5,
        "lam": 1.0,
        "cloud": {"kind": "grid", "lo": -1.0, "hi": 1.0, "n": 5},
        "K": {"kind": "explicit", "points": [0.0]},
        "u": "0",
        "v": "0",
        "h1": "0",
        "h2": "0",
    }
    data.update(overrides)
    return data


@pytest.mark.parametrize("schedule", [[1.0, 2.0], [4.0, 2.0], [2.0, 2.0]])
def test_schedule_validation(schedule):
    with pytest.raises(ValidationError, match="schedule"):
        ProblemDocument.model_validate(_doc(doubling=_doubling(schedule=schedule)))


def test_doubling_eps_in_unit_interval():
    with pytest.raises(ValidationError):
        ProblemDocument.model_validate(_doc(doubling=_doubling(eps=1.0)))


def test_solve_needs_discretized_resolvent():
    with pytest.raises(ValidationError, match="needs a resolvent section"):
        ProblemDocument.model_validate(_doc(doubling=_doubling(u="solve")))
    with pytest.raises(ValidationError, match="needs a resolvent section"):
        ProblemDocument.model_validate(
            _doc(doubling=_doubling(v="solve"), resolvent=_chain())
        )


def test_ball_cloud_needs_seed():
    with pytest.raises(ValidationError):
        CheckEntry.model_validate(
            {"name": "penalty", "cloud": {"kind": "ball", "radius": 1.0, "count": 3}}
        )


def test_check_entries():
    with pytest.raises(ValidationError):
        CheckEntry.model_validate({"name": "no_such_check"})
    with pytest.raises(ValidationError, match="increasing"):
        CheckEntry.model_validate({"name": "controlled_growth", "alphas": [4.0, 2.0]})
    entry = CheckEntry.model_validate({"name": "containment"})
    assert entry.cloud is None
    assert entry.alphas == [2.0, 4.0, 8.0, 16.0]


def test_unknown_keys_are_rejected():
    with pytest.raises(ValidationError):
        ProblemDocument.model_validate(_doc(extra_section={}))
