"""Message schemas, the status-code table and canonical JSON encoding.

Three message kinds travel between the scheduler, executors and tools:

* ``AgentRequest``      a structured tool invocation,
* ``AgentResponse``     validated tool output (always status 200),
* ``AssistanceRequest`` an escalation carrying a 6xx code.

All messages are frozen dataclasses. Invariants are checked on construction,
so an instance that exists is valid; ``decode_message`` therefore reports bad
input as :class:`SchemaViolation` with the offending field path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from fnmatch import fnmatch
from typing import Any, Iterable, Union

from .errors import MalformedMessage, SchemaViolation


class Stage(str, Enum):
    REQUEST = "RequestStage"
    TOOL_CALL = "ToolCallStage"
    OUTPUT_EXTRACTION = "OutputExtractionStage"
    SUCCESS = "Success"


class StatusCode(IntEnum):
    OK = 200
    MISSING_REQUIRED_PARAMETERS = 601
    WRONG_STEP_DETAILS = 602
    INVALID_PARAMETER_USAGE = 603
    TOOL_CALL_FAILURE = 604
    INCOMPLETE_INFORMATION = 605
    DEPENDENCY_INCOMPLETE_INFORMATION = 606
    WRONG_INFORMATION = 607

    @property
    def stage(self) -> Stage:
        return _STAGE_OF[self]

    @property
    def label(self) -> str:
        return f"{int(self)} {self.name}"


_STAGE_OF = {
    StatusCode.OK: Stage.SUCCESS,
    StatusCode.MISSING_REQUIRED_PARAMETERS: Stage.REQUEST,
    StatusCode.WRONG_STEP_DETAILS: Stage.REQUEST,
    StatusCode.INVALID_PARAMETER_USAGE: Stage.REQUEST,
    StatusCode.TOOL_CALL_FAILURE: Stage.TOOL_CALL,
    StatusCode.INCOMPLETE_INFORMATION: Stage.OUTPUT_EXTRACTION,
    StatusCode.DEPENDENCY_INCOMPLETE_INFORMATION: Stage.OUTPUT_EXTRACTION,
    StatusCode.WRONG_INFORMATION: Stage.OUTPUT_EXTRACTION,
}


def classify_stage(code: int | StatusCode) -> Stage:
    """Pipeline stage a status code belongs to. Raises ValueError for unknown codes."""
    return StatusCode(code).stage


class Resolution(str, Enum):
    RETRY = "Retry"
    REROUTE = "Reroute"
    ABANDON = "Abandon"


class Origin(str, Enum):
    LITERAL = "Literal"
    DEPENDENCY = "Dependency"


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamBinding:
    """How a node obtains one parameter: a literal value or another node's output."""

    name: str
    origin: Origin
    literal_value: str | None = None
    source: tuple[str, str] | None = None  # (node id, output name)

    def __post_init__(self):
        object.__setattr__(self, "origin", Origin(self.origin))
        if not self.name:
            raise SchemaViolation("name", "parameter name must be non-empty")
        if self.origin is Origin.LITERAL:
            if self.literal_value is None or self.source is not None:
                raise SchemaViolation(self.name, "Literal binding needs literal_value and no source")
        else:
            if self.source is None or self.literal_value is not None:
                raise SchemaViolation(self.name, "Dependency binding needs source and no literal_value")
            node, output = self.source
            if not node or not output:
                raise SchemaViolation(self.name, "Dependency source needs node and output")
            object.__setattr__(self, "source", (node, output))

    @classmethod
    def literal(cls, name: str, value: str) -> "ParamBinding":
        return cls(name, Origin.LITERAL, literal_value=value)

    @classmethod
    def dependency(cls, name: str, node: str, output: str) -> "ParamBinding":
        return cls(name, Origin.DEPENDENCY, source=(node, output))


@dataclass(frozen=True)
class AgentRequest:
    method: str
    endpoint: str
    headers: tuple[tuple[str, str], ...] = ()
    body: tuple[tuple[str, str], ...] = ()

    kind = "AGENT_REQUEST"

    def __post_init__(self):
        if not self.endpoint:
            raise SchemaViolation("endpoint", "must be non-empty")
        if not self.method:
            raise SchemaViolation("method", "must be non-empty")
        headers = tuple(sorted((str(k), str(v)) for k, v in _pairs(self.headers)))
        names = [k for k, _ in headers]
        if len(set(names)) != len(names):
            raise SchemaViolation("headers", "duplicate header name")
        body = tuple((str(k), str(v)) for k, v in _pairs(self.body))
        seen = set()
        for i, (k, _) in enumerate(body):
            if k in seen:
                raise SchemaViolation(f"body[{i}].name", f"duplicate parameter {k!r}")
            seen.add(k)
        object.__setattr__(self, "headers", headers)
        object.__setattr__(self, "body", body)

    def body_dict(self) -> dict[str, str]:
        return dict(self.body)


@dataclass(frozen=True)
class OutputVariable:
    name: str
    content: str

    def __post_init__(self):
        if not self.name:
            raise SchemaViolation("name", "output variable name must be non-empty")


@dataclass(frozen=True)
class DependentInputVariable:
    name: str
    target_node: str
    declared_type: str
    content: str

    def __post_init__(self):
        if not self.name:
            raise SchemaViolation("name", "must be non-empty")
        if not self.target_node:
            raise SchemaViolation("target_node", "must be non-empty")


@dataclass(frozen=True)
class AgentResponse:
    status: StatusCode
    outputs: tuple[OutputVariable, ...] = ()
    dependent_inputs: tuple[DependentInputVariable, ...] = ()

    kind = "AGENT_RESPONSE"

    def __post_init__(self):
        object.__setattr__(self, "status", _status(self.status, "status"))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "dependent_inputs", tuple(self.dependent_inputs))
        if self.status is StatusCode.OK and not self.outputs:
            raise SchemaViolation("outputs", "status 200 requires at least one output")
        if self.status is not StatusCode.OK and (self.outputs or self.dependent_inputs):
            raise SchemaViolation("outputs", "non-200 responses carry no outputs")


@dataclass(frozen=True)
class StatusUpdate:
    previous_progress: str
    current_progress: str
    current_node: str
    completed_tools: tuple[tuple[str, str], ...] = ()
    encountered_issues: str = ""

    def __post_init__(self):
        if not self.current_node:
            raise SchemaViolation("status_update.current_node", "must be non-empty")
        object.__setattr__(
            self, "completed_tools", tuple((str(t), str(s)) for t, s in _pairs(self.completed_tools))
        )


@dataclass(frozen=True)
class SuggestedResolution:
    action: Resolution
    rationale: str = ""

    def __post_init__(self):
        try:
            object.__setattr__(self, "action", Resolution(self.action))
        except ValueError:
            raise SchemaViolation("suggested_resolution.action", f"unknown action {self.action!r}") from None


@dataclass(frozen=True)
class AssistanceRequest:
    error: StatusCode
    error_node: str
    error_tool: str
    description: str
    relevant_context: str
    suggested_resolution: SuggestedResolution
    status_update: StatusUpdate

    kind = "ASSISTANCE_REQUEST"

    def __post_init__(self):
        code = _status(self.error, "error")
        if code.stage is Stage.SUCCESS:
            raise SchemaViolation("error", "assistance requests carry an error code, not 200")
        object.__setattr__(self, "error", code)
        if self.error_node != self.status_update.current_node:
            raise SchemaViolation("error_node", "must equal status_update.current_node")


Message = Union[AgentRequest, AgentResponse, AssistanceRequest]


def _status(value: Any, path: str) -> StatusCode:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaViolation(path, f"expected integer status code, got {value!r}")
    try:
        return StatusCode(value)
    except ValueError:
        raise SchemaViolation(path, f"unknown status code {value}") from None


def _pairs(items) -> Iterable[tuple[Any, Any]]:
    if isinstance(items, dict):
        return items.items()
    return items


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def to_dict(msg: Message) -> dict[str, Any]:
    if isinstance(msg, AgentRequest):
        return {
            "kind": msg.kind,
            "method": msg.method,
            "endpoint": msg.endpoint,
            "headers": dict(msg.headers),
            "body": [{"name": k, "value": v} for k, v in msg.body],
        }
    if isinstance(msg, AgentResponse):
        return {
            "kind": msg.kind,
            "status": int(msg.status),
            "outputs": [{"name": o.name, "content": o.content} for o in msg.outputs],
            "dependent_inputs": [
                {"name": d.name, "target_node": d.target_node,
                 "declared_type": d.declared_type, "content": d.content}
                for d in msg.dependent_inputs
            ],
        }
    if isinstance(msg, AssistanceRequest):
        su = msg.status_update
        return {
            "kind": msg.kind,
            "error": int(msg.error),
            "error_node": msg.error_node,
            "error_tool": msg.error_tool,
            "description": msg.description,
            "relevant_context": msg.relevant_context,
            "suggested_resolution": {
                "action": msg.suggested_resolution.action.value,
                "rationale": msg.suggested_resolution.rationale,
            },
            "status_update": {
                "previous_progress": su.previous_progress,
                "current_progress": su.current_progress,
                "current_node": su.current_node,
                "completed_tools": [{"tool": t, "summary": s} for t, s in su.completed_tools],
                "encountered_issues": su.encountered_issues,
            },
        }
    raise TypeError(f"not a protocol message: {type(msg).__name__}")


def encode_message(msg: Message) -> str:
    """Canonical JSON text: sorted keys, no insignificant whitespace, UTF-8."""
    return json.dumps(to_dict(msg), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def decode_message(text: str | bytes) -> Message:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedMessage(f"not UTF-8: {exc}") from None
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedMessage(str(exc)) from None
    if not isinstance(data, dict):
        raise MalformedMessage("top-level value must be an object")
    return from_dict(data)


_FIELDS = {
    "AGENT_REQUEST": {"kind", "method", "endpoint", "headers", "body"},
    "AGENT_RESPONSE": {"kind", "status", "outputs", "dependent_inputs"},
    "ASSISTANCE_REQUEST": {
        "kind", "error", "error_node", "error_tool", "description",
        "relevant_context", "suggested_resolution", "status_update",
    },
}


def from_dict(data: dict[str, Any]) -> Message:
    kind = data.get("kind")
    if kind not in _FIELDS:
        raise SchemaViolation("kind", f"unknown message kind {kind!r}")
    _exact_keys(data, _FIELDS[kind], "")

    if kind == "AGENT_REQUEST":
        headers = _get(data, "headers", dict, "")
        for k, v in headers.items():
            _check(v, str, f"headers.{k}")
        body = [
            (_get(item, "name", str, f"body[{i}]"), _get(item, "value", str, f"body[{i}]"))
            for i, item in enumerate(_items(data, "body", {"name", "value"}, ""))
        ]
        return AgentRequest(
            method=_get(data, "method", str, ""),
            endpoint=_get(data, "endpoint", str, ""),
            headers=tuple(headers.items()),
            body=tuple(body),
        )

    if kind == "AGENT_RESPONSE":
        outputs = [
            OutputVariable(_get(o, "name", str, f"outputs[{i}]"), _get(o, "content", str, f"outputs[{i}]"))
            for i, o in enumerate(_items(data, "outputs", {"name", "content"}, ""))
        ]
        deps = []
        dkeys = {"name", "target_node", "declared_type", "content"}
        for i, d in enumerate(_items(data, "dependent_inputs", dkeys, "")):
            p = f"dependent_inputs[{i}]"
            deps.append(DependentInputVariable(
                _get(d, "name", str, p), _get(d, "target_node", str, p),
                _get(d, "declared_type", str, p), _get(d, "content", str, p),
            ))
        return AgentResponse(_status(data.get("status"), "status"), tuple(outputs), tuple(deps))

    sr = _get(data, "suggested_resolution", dict, "")
    _exact_keys(sr, {"action", "rationale"}, "suggested_resolution")
    su = _get(data, "status_update", dict, "")
    _exact_keys(
        su,
        {"previous_progress", "current_progress", "current_node", "completed_tools", "encountered_issues"},
        "status_update",
    )
    tools = [
        (_get(t, "tool", str, f"status_update.completed_tools[{i}]"),
         _get(t, "summary", str, f"status_update.completed_tools[{i}]"))
        for i, t in enumerate(_items(su, "completed_tools", {"tool", "summary"}, "status_update"))
    ]
    return AssistanceRequest(
        error=_status(data.get("error"), "error"),
        error_node=_get(data, "error_node", str, ""),
        error_tool=_get(data, "error_tool", str, ""),
        description=_get(data, "description", str, ""),
        relevant_context=_get(data, "relevant_context", str, ""),
        suggested_resolution=SuggestedResolution(
            _get(sr, "action", str, "suggested_resolution"),
            _get(sr, "rationale", str, "suggested_resolution"),
        ),
        status_update=StatusUpdate(
            previous_progress=_get(su, "previous_progress", str, "status_update"),
            current_progress=_get(su, "current_progress", str, "status_update"),
            current_node=_get(su, "current_node", str, "status_update"),
            completed_tools=tuple(tools),
            encountered_issues=_get(su, "encountered_issues", str, "status_update"),
        ),
    )


def _join(prefix: str, key: str) -> str:
    return f"{prefix}.{key}" if prefix else key


def _check(value, typ, path):
    if not isinstance(value, typ) or isinstance(value, bool):
        raise SchemaViolation(path, f"expected {typ.__name__}, got {type(value).__name__}")
    return value


def _get(obj: dict, key: str, typ, prefix: str):
    path = _join(prefix, key)
    if key not in obj:
        raise SchemaViolation(path, "missing field")
    return _check(obj[key], typ, path)


def _exact_keys(obj: dict, allowed: set[str], prefix: str):
    for key in obj:
        if key not in allowed:
            raise SchemaViolation(_join(prefix, key), "unknown field")
    for key in sorted(allowed - obj.keys()):
        raise SchemaViolation(_join(prefix, key), "missing field")


def _items(obj: dict, key: str, allowed: set[str], prefix: str) -> list[dict]:
    items = _get(obj, key, list, prefix)
    path = _join(prefix, key)
    for i, item in enumerate(items):
        _check(item, dict, f"{path}[{i}]")
        _exact_keys(item, allowed, f"{path}[{i}]")
    return items


# ---------------------------------------------------------------------------
# Redaction (traces only; live requests keep their secrets)
# ---------------------------------------------------------------------------

DEFAULT_SECRET_PATTERNS = ("*_key", "*_token")
REDACTED = "***"


def redact(request: AgentRequest, patterns: Iterable[str] = DEFAULT_SECRET_PATTERNS) -> AgentRequest:
    """Copy of ``request`` with secret-looking header and body values masked."""
    patterns = tuple(patterns)

    def secret(name: str) -> bool:
        low = name.lower()
        return any(fnmatch(low, p) for p in patterns)

    return replace(
        request,
        headers=tuple((k, REDACTED if secret(k) else v) for k, v in request.headers),
        body=tuple((k, REDACTED if secret(k) else v) for k, v in request.body),
    )
