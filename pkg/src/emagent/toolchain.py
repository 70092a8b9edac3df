"""Function registry and model-output validation for the analysis toolchain.

The model emits a JSON object naming a registered function plus arguments.
Nothing reaches a backend handler until the call has been parsed and checked
against the function's declared parameter schema; failures come back as a
complete list of violations (not just the first) so the agent can explain
the problem on retry.

The schema language is a closed subset on purpose: scalar types, flat enums,
and one level of arrays. That covers the whole analysis tool set and stays
exhaustively validatable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Callable, Mapping

from .errors import DuplicateFunction, ExecutionError

PARAM_TYPES = ("string", "integer", "number", "boolean", "enum", "array")
ARRAY_ITEM_TYPES = ("string", "integer", "number", "boolean")

VIOLATION_KINDS = (
    "unknown_function", "missing_required", "unknown_param",
    "type_mismatch", "enum_mismatch", "malformed_json",
)

_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str
    required: bool = True
    description: str = ""
    values: tuple[str, ...] = ()      # enum members
    items: str = "string"             # array element type

    def __post_init__(self):
        if self.type not in PARAM_TYPES:
            raise ValueError(f"unknown param type {self.type!r}")
        if self.type == "enum" and not self.values:
            raise ValueError(f"enum param {self.name!r} needs at least one value")
        if self.type == "array" and self.items not in ARRAY_ITEM_TYPES:
            raise ValueError(f"array param {self.name!r} has unsupported item type {self.items!r}")


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    description: str
    parameters: tuple[ParamSpec, ...]

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise ValueError(f"function name {self.name!r} must be lowercase snake case")
        names = [p.name for p in self.parameters]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate parameter names in {self.name!r}")

    def param(self, name: str) -> ParamSpec | None:
        for p in self.parameters:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class FunctionCall:
    name: str
    arguments: Mapping[str, Any]


@dataclass(frozen=True)
class Violation:
    kind: str
    path: str
    message: str

    def __post_init__(self):
        if self.kind not in VIOLATION_KINDS:
            raise ValueError(f"unknown violation kind {self.kind!r}")


Handler = Callable[[Mapping[str, Any], Any], Any]


class FunctionRegistry:
    """Write-once registry of FunctionSpecs and their backend handlers."""

    def __init__(self):
        self._specs: dict[str, FunctionSpec] = {}
        self._handlers: dict[str, Handler] = {}

    def __len__(self) -> int:
        return len(self._specs)

    def register(self, spec: FunctionSpec, handler: Handler | None = None) -> None:
        if spec.name in self._specs:
            raise DuplicateFunction(spec.name)
        self._specs[spec.name] = spec
        if handler is not None:
            self._handlers[spec.name] = handler

    def bind(self, name: str, handler: Handler) -> None:
        if name not in self._specs:
            raise KeyError(f"no registered function named {name!r}")
        self._handlers[name] = handler

    def get(self, name: str) -> FunctionSpec | None:
        return self._specs.get(name)

    def handler(self, name: str) -> Handler | None:
        return self._handlers.get(name)

    def describe(self) -> list[dict]:
        """Spec list, name-sorted, in the JSON shape the calling prompt consumes."""
        return [spec_to_json(self._specs[name]) for name in sorted(self._specs)]


def spec_to_json(spec: FunctionSpec) -> dict:
    properties = {}
    required = []
    for p in spec.parameters:
        prop: dict[str, Any] = {}
        if p.type == "enum":
            prop["type"] = "string"
            prop["enum"] = list(p.values)
        elif p.type == "array":
            prop["type"] = "array"
            prop["items"] = {"type": p.items}
        else:
            prop["type"] = p.type
        if p.description:
            prop["description"] = p.description
        properties[p.name] = prop
        if p.required:
            required.append(p.name)
    return {
        "name": spec.name,
        "description": spec.description,
        "parameters": {
            "type": "object",
            "properties": properties,
            "required": required,
        },
    }


def call_to_json(call: FunctionCall) -> str:
    return json.dumps({"name": call.name, "arguments": dict(call.arguments)},
                      ensure_ascii=False, sort_keys=True)


def parse_function_call(raw: str, registry: FunctionRegistry) -> FunctionCall | list[Violation]:
    """Extract, look up, and validate the first JSON object in model output.

    Returns the validated FunctionCall, or the complete list of violations.
    Never raises on bad input: malformed text and unknown functions are
    violations too.
    """
    obj = _first_json_object(raw)
    if obj is None:
        return [Violation("malformed_json", "", "no JSON object found in output")]

    violations: list[Violation] = []
    name = obj.get("name")
    if not isinstance(name, str):
        violations.append(Violation("malformed_json", "name",
                                    'top-level "name" must be a string'))
    arguments = obj.get("arguments")
    if not isinstance(arguments, dict):
        violations.append(Violation("malformed_json", "arguments",
                                    'top-level "arguments" must be an object'))
    if violations:
        return violations

    spec = registry.get(name)
    if spec is None:
        return [Violation("unknown_function", "name", f"no function named {name!r}")]

    call = FunctionCall(name=name, arguments=arguments)
    violations = validate_call(call, spec)
    return call if not violations else violations


def validate_call(call: FunctionCall, spec: FunctionSpec) -> list[Violation]:
    """All schema violations of a call against its spec: required params
    present, no unknown params, types conform, enum members valid."""
    assert call.name == spec.name
    violations: list[Violation] = []
    for p in spec.parameters:
        if p.required and p.name not in call.arguments:
            violations.append(Violation("missing_required", p.name,
                                        f"required parameter {p.name!r} is missing"))
    for arg_name, value in call.arguments.items():
        p = spec.param(arg_name)
        if p is None:
            violations.append(Violation("unknown_param", arg_name,
                                        f"parameter {arg_name!r} is not declared"))
            continue
        violations.extend(_check_value(p, value))
    return violations


def _check_value(p: ParamSpec, value: Any) -> list[Violation]:
    if p.type == "enum":
        if not isinstance(value, str):
            return [Violation("type_mismatch", p.name,
                              f"{p.name!r} must be a string, got {type(value).__name__}")]
        if value not in p.values:
            return [Violation("enum_mismatch", p.name,
                              f"{p.name!r} must be one of {list(p.values)}, got {value!r}")]
        return []
    if p.type == "array":
        if not isinstance(value, list):
            return [Violation("type_mismatch", p.name,
                              f"{p.name!r} must be an array, got {type(value).__name__}")]
        out = []
        for i, item in enumerate(value):
            if not _scalar_ok(p.items, item):
                out.append(Violation("type_mismatch", f"{p.name}[{i}]",
                                     f"{p.name}[{i}] must be {p.items}, got {type(item).__name__}"))
        return out
    if not _scalar_ok(p.type, value):
        return [Violation("type_mismatch", p.name,
                          f"{p.name!r} must be {p.type}, got {type(value).__name__}")]
    return []


def _scalar_ok(type_name: str, value: Any) -> bool:
    if type_name == "string":
        return isinstance(value, str)
    if type_name == "boolean":
        return isinstance(value, bool)
    if type_name == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if type_name == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return False


def execute_call(call: FunctionCall, registry: FunctionRegistry, backend: Any) -> Any:
    """Dispatch a *validated* call to its bound handler.

    Callers must have run validate_call (or gotten the call from
    parse_function_call); executing unvalidated input is a programming error.
    """
    handler = registry.handler(call.name)
    if handler is None:
        raise ExecutionError(f"unbound function {call.name!r}")
    return handler(call.arguments, backend)


def violations_text(violations: list[Violation]) -> str:
    """Human/model-readable rendering used in retry prompts."""
    return "; ".join(
        f"{v.kind}" + (f" at {v.path}" if v.path else "") + f": {v.message}"
        for v in violations
    )


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _first_json_object(raw: str) -> dict | None:
    fenced = _FENCE_RE.search(raw)
    if fenced:
        raw = fenced.group(1)
    decoder = json.JSONDecoder()
    pos = raw.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(raw, pos)
        except json.JSONDecodeError:
            pos = raw.find("{", pos + 1)
            continue
        if isinstance(obj, dict):
            return obj
        pos = raw.find("{", pos + 1)
    return None
