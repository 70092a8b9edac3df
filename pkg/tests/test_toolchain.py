from __future__ import annotations

import json

import pytest

from emagent.errors import DuplicateFunction, ExecutionError
from emagent.toolchain import (
    FunctionCall,
    FunctionRegistry,
    FunctionSpec,
    ParamSpec,
    Violation,
    call_to_json,
    execute_call,
    parse_function_call,
    spec_to_json,
    validate_call,
)

AGG_SPEC = FunctionSpec(
    name="aggregate_emissions",
    description="sum by group",
    parameters=(
        ParamSpec("pollutant", "string"),
        ParamSpec("year", "integer"),
        ParamSpec("group_by", "enum", values=("sector", "subsector", "pollutant", "year")),
    ),
)


@pytest.fixture
def small_registry():
    registry = FunctionRegistry()
    registry.register(AGG_SPEC)
    return registry


# --- register ----------------------------------------------------------------

def test_register_and_size():
    registry = FunctionRegistry()
    registry.register(AGG_SPEC)
    assert len(registry) == 1


def test_register_duplicate_name(small_registry):
    with pytest.raises(DuplicateFunction):
        small_registry.register(AGG_SPEC)


def test_describe_lists_names_sorted():
    registry = FunctionRegistry()
    for name in ("zeta", "alpha", "mid", "beta"):
        registry.register(FunctionSpec(name=name, description="d", parameters=()))
    assert [s["name"] for s in registry.describe()] == ["alpha", "beta", "mid", "zeta"]


def test_spec_json_shape():
    payload = spec_to_json(AGG_SPEC)
    assert payload["name"] == "aggregate_emissions"
    assert payload["parameters"]["type"] == "object"
    assert payload["parameters"]["required"] == ["pollutant", "year", "group_by"]
    assert payload["parameters"]["properties"]["group_by"]["enum"][0] == "sector"


def test_spec_name_must_be_snake_case():
    with pytest.raises(ValueError):
        FunctionSpec(name="BadName", description="d", parameters=())


def test_enum_needs_values():
    with pytest.raises(ValueError):
        ParamSpec("p", "enum", values=())


# --- parse_function_call ----------------------------------------------------------

VALID_RAW = json.dumps({
    "name": "aggregate_emissions",
    "arguments": {"pollutant": "NOx", "year": 2020, "group_by": "sector"},
})


def test_parse_valid_raw(small_registry):
    call = parse_function_call(VALID_RAW, small_registry)
    assert isinstance(call, FunctionCall)
    assert call.arguments["year"] == 2020


def test_parse_not_json(small_registry):
    violations = parse_function_call("not json", small_registry)
    assert [v.kind for v in violations] == ["malformed_json"]


def test_parse_unknown_function(small_registry):
    raw = json.dumps({"name": "no_such_fn", "arguments": {}})
    violations = parse_function_call(raw, small_registry)
    assert [v.kind for v in violations] == ["unknown_function"]


def test_parse_extracts_fenced_json(small_registry):
    raw = f"Sure, calling the tool now:\n```json\n{VALID_RAW}\n```\nDone."
    call = parse_function_call(raw, small_registry)
    assert isinstance(call, FunctionCall)


def test_parse_extracts_first_object_from_prose(small_registry):
    raw = "I will call " + VALID_RAW + " and that is all."
    assert isinstance(parse_function_call(raw, small_registry), FunctionCall)


def test_parse_requires_name_and_arguments(small_registry):
    violations = parse_function_call(json.dumps({"name": 3, "arguments": []}),
                                     small_registry)
    kinds = sorted(v.kind for v in violations)
    assert kinds == ["malformed_json", "malformed_json"]


# --- validate_call -----------------------------------------------------------------

def test_missing_required(small_registry):
    call = FunctionCall("aggregate_emissions", {"year": 2020, "group_by": "sector"})
    violations = validate_call(call, AGG_SPEC)
    assert [(v.kind, v.path) for v in violations] == [("missing_required", "pollutant")]


def test_type_mismatch_string_for_integer():
    call = FunctionCall("aggregate_emissions",
                        {"pollutant": "NOx", "year": "2020", "group_by": "sector"})
    violations = validate_call(call, AGG_SPEC)
    assert [(v.kind, v.path) for v in violations] == [("type_mismatch", "year")]


def test_bool_is_not_an_integer():
    call = FunctionCall("aggregate_emissions",
                        {"pollutant": "NOx", "year": True, "group_by": "sector"})
    assert [v.kind for v in validate_call(call, AGG_SPEC)] == ["type_mismatch"]


def test_two_independent_defects_two_violations():
    call = FunctionCall("aggregate_emissions", {
        "pollutant": "NOx", "year": 2020, "group_by": "continent", "foo": 1,
    })
    violations = validate_call(call, AGG_SPEC)
    assert sorted((v.kind, v.path) for v in violations) == [
        ("enum_mismatch", "group_by"), ("unknown_param", "foo"),
    ]


def test_array_items_type_checked():
    spec = FunctionSpec(
        name="multi", description="d",
        parameters=(ParamSpec("pollutants", "array", items="string"),),
    )
    call = FunctionCall("multi", {"pollutants": ["NOx", 4, "CO"]})
    violations = validate_call(call, spec)
    assert [(v.kind, v.path) for v in violations] == [("type_mismatch", "pollutants[1]")]


def test_violation_completeness_counts():
    # n independently seeded defects -> exactly n violations
    call = FunctionCall("aggregate_emissions", {
        "year": "not int",          # type_mismatch
        "group_by": "continent",    # enum_mismatch
        "bogus": True,              # unknown_param
        # pollutant missing         # missing_required
    })
    assert len(validate_call(call, AGG_SPEC)) == 4


# --- execute_call ------------------------------------------------------------------

def test_execute_dispatches_to_handler(small_registry):
    seen = {}

    def handler(args, backend):
        seen.update(args)
        return backend

    small_registry.bind("aggregate_emissions", handler)
    call = parse_function_call(VALID_RAW, small_registry)
    assert execute_call(call, small_registry, "the-backend") == "the-backend"
    assert seen["pollutant"] == "NOx"


def test_execute_unbound_function(small_registry):
    call = parse_function_call(VALID_RAW, small_registry)
    with pytest.raises(ExecutionError, match="unbound function"):
        execute_call(call, small_registry, None)


def test_no_side_effects_before_validation(small_registry):
    calls = {"count": 0}

    def probe(args, backend):
        calls["count"] += 1
        return None

    small_registry.bind("aggregate_emissions", probe)
    invalid_raws = [
        "not json",
        json.dumps({"name": "no_such_fn", "arguments": {}}),
        json.dumps({"name": "aggregate_emissions", "arguments": {"year": 2020}}),
        json.dumps({"name": "aggregate_emissions",
                    "arguments": {"pollutant": "NOx", "year": "x", "group_by": "sector"}}),
    ]
    for raw in invalid_raws:
        result = parse_function_call(raw, small_registry)
        assert isinstance(result, list) and result
        # an invalid parse never reaches execute_call in the agent loop
    assert calls["count"] == 0


# --- serialization identity ---------------------------------------------------------------

def test_parse_serialize_round_trip(small_registry):
    call = parse_function_call(VALID_RAW, small_registry)
    again = parse_function_call(call_to_json(call), small_registry)
    assert again == call


def test_violation_kind_validated():
    with pytest.raises(ValueError):
        Violation("nonsense_kind", "", "msg")
