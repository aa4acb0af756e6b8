"""Runs one node through input preparation, the tool call and output validation.

The executor never mutates the scheduler's blueprint. It works on a snapshot
and answers with a single terminal message: a 200 ``AgentResponse`` or an
``AssistanceRequest`` whose code belongs to the phase that failed.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from typing import Callable

from .blueprint import BlueprintNode, ExecutionBlueprint, NodeStatus
from .errors import InputError
from .protocol import (
    AgentRequest,
    AgentResponse,
    AssistanceRequest,
    DependentInputVariable,
    Origin,
    OutputVariable,
    Resolution,
    StatusCode,
    StatusUpdate,
    SuggestedResolution,
)
from .tools.faults import FaultBehavior, FaultEntry
from .tools.mocks import nonempty
from .tools.registry import CallContext, ToolAdapter, ToolRegistry, ToolSchema, Validator

PREPARE, TOOL_CALL, VALIDATE = 1, 2, 3
PHASE_NAMES = {PREPARE: "input preparation", TOOL_CALL: "tool call", VALIDATE: "output validation"}
DEFAULT_OUTPUT = "payload"

Message = AgentResponse | AssistanceRequest


@dataclass(frozen=True)
class Outcome:
    message: Message
    phase: int
    request: AgentRequest | None = None


def suggest(code: StatusCode, attempt: int, detail: str = "") -> SuggestedResolution:
    code = StatusCode(code)
    if code in (StatusCode.MISSING_REQUIRED_PARAMETERS, StatusCode.WRONG_STEP_DETAILS,
                StatusCode.INVALID_PARAMETER_USAGE):
        return SuggestedResolution(Resolution.REROUTE, detail or "fix the step definition or use another tool")
    if code is StatusCode.TOOL_CALL_FAILURE:
        return SuggestedResolution(Resolution.RETRY, "tool failures are often transient")
    if attempt <= 1:
        return SuggestedResolution(Resolution.RETRY, "tool output may differ on a second call")
    return SuggestedResolution(Resolution.REROUTE, "output still unusable after a retry")


def assistance(snapshot: ExecutionBlueprint, node: BlueprintNode, code: StatusCode,
               description: str, context: str = "", attempt: int = 1, phase: int = PREPARE,
               suggestion: str = "") -> AssistanceRequest:
    code = StatusCode(code)
    done = snapshot.ids_with_status(NodeStatus.SUCCEEDED)
    completed = []
    for nid in done:
        n = snapshot.node(nid)
        produced = sorted(name for (owner, name) in snapshot.output_store if owner == nid)
        completed.append((n.tool, f"{nid} produced {', '.join(produced) or 'no outputs'}"))
    return AssistanceRequest(
        error=code,
        error_node=node.id,
        error_tool=node.tool,
        description=description,
        relevant_context=context,
        suggested_resolution=suggest(code, attempt, suggestion),
        status_update=StatusUpdate(
            previous_progress=f"{len(done)} of {len(snapshot)} nodes succeeded",
            current_progress=f"{node.id} attempt {attempt}: {PHASE_NAMES[phase]} failed",
            current_node=node.id,
            completed_tools=tuple(completed),
            encountered_issues=f"{node.tool} {code.label}: {description}",
        ),
    )


# -- phase 1 ------------------------------------------------------------------

def prepare_request(snapshot: ExecutionBlueprint, node: BlueprintNode, schema: ToolSchema,
                    attempt: int = 1) -> AgentRequest | AssistanceRequest:
    """Build the tool request from the node template and its resolved inputs."""
    ep = schema.endpoint(node.endpoint)
    if ep is None:
        return assistance(snapshot, node, StatusCode.WRONG_STEP_DETAILS,
                          f"endpoint {node.endpoint!r} is not declared by tool {schema.name!r}",
                          f"declared endpoints: {', '.join(e.id for e in schema.endpoints)}", attempt)
    undeclared = sorted({b.name for b in node.params} - set(ep.params))
    if undeclared:
        return assistance(snapshot, node, StatusCode.WRONG_STEP_DETAILS,
                          f"parameters not accepted by {schema.name}.{ep.id}: {', '.join(undeclared)}",
                          f"accepted parameters: {', '.join(ep.params)}", attempt)
    if snapshot.node(node.id) != node:
        snapshot = snapshot.snapshot()
        snapshot.replace_node(node)
    try:
        body = snapshot.resolve_inputs(node.id, ep.required, ep.formats)
    except InputError as exc:
        bound = ", ".join(b.name for b in node.params) or "none"
        missing = [p for p in ep.required if p not in {b.name for b in node.params}]
        hint = f"add a step to obtain {' and '.join(missing)}" if missing else ""
        return assistance(snapshot, node, exc.code, str(exc),
                          f"bound parameters: {bound}; required: {', '.join(ep.required) or 'none'}",
                          attempt, suggestion=hint)
    return AgentRequest(method=node.method, endpoint=node.endpoint, body=tuple(body))


# -- phase 2 ------------------------------------------------------------------

class _Timeout(Exception):
    pass


def _call_with_timeout(fn: Callable[[], str], timeout: float | None) -> str:
    if timeout is None:
        return fn()
    box: dict = {}

    def target():
        try:
            box["value"] = fn()
        except BaseException as exc:  # re-raised on the caller's thread
            box["error"] = exc

    t = threading.Thread(target=target, daemon=True)
    t.start()
    t.join(timeout)
    if t.is_alive():
        raise _Timeout()
    if "error" in box:
        raise box["error"]
    return box["value"]


def invoke_tool(request: AgentRequest, adapter: ToolAdapter, timeout: float | None,
                snapshot: ExecutionBlueprint, node: BlueprintNode,
                ctx: CallContext | None = None) -> str | AssistanceRequest:
    ctx = ctx or CallContext(node.id, node.tool, timeout=timeout)
    try:
        payload = _call_with_timeout(lambda: adapter.invoke(request, ctx), timeout)
    except _Timeout:
        return assistance(snapshot, node, StatusCode.TOOL_CALL_FAILURE, f"timeout after {timeout:g}s",
                          f"{request.method} {request.endpoint}", ctx.attempt, TOOL_CALL)
    except Exception as exc:
        return assistance(snapshot, node, StatusCode.TOOL_CALL_FAILURE,
                          f"{type(exc).__name__}: {exc}", f"{request.method} {request.endpoint}",
                          ctx.attempt, TOOL_CALL)
    if not isinstance(payload, str):
        return assistance(snapshot, node, StatusCode.TOOL_CALL_FAILURE,
                          f"adapter returned {type(payload).__name__}, expected text",
                          f"{request.method} {request.endpoint}", ctx.attempt, TOOL_CALL)
    return payload


# -- phase 3 ------------------------------------------------------------------

def _text(value) -> str:
    return value if isinstance(value, str) else json.dumps(value, sort_keys=True)


def extract_fields(payload: str, names: list[str], declared: tuple[str, ...] = ()) -> dict[str, str]:
    """Named fields from a JSON-object payload, or the whole payload for a single name.

    A JSON object is read by field name when the endpoint declares output
    fields or when any wanted name is present. Otherwise a single wanted
    name receives the whole payload.
    """
    try:
        data = json.loads(payload)
    except (json.JSONDecodeError, TypeError):
        data = None
    if isinstance(data, dict) and (declared or any(n in data for n in names)):
        return {n: _text(data[n]) for n in names if n in data and data[n] is not None}
    if len(names) == 1:
        return {names[0]: payload}
    return {}


def dependent_declarations(snapshot: ExecutionBlueprint, node: BlueprintNode) -> list[tuple[str, str]]:
    """``(consumer, variable)`` pairs that downstream nodes read from ``node``
    but that are not among its own expected outputs."""
    wanted = []
    for cid in sorted(snapshot.nodes):
        for b in snapshot.node(cid).params:
            if b.origin is Origin.DEPENDENCY and b.source[0] == node.id \
                    and b.source[1] not in node.expected_outputs:
                wanted.append((cid, b.source[1]))
    return sorted(set(wanted))


def validate_response(payload: str, snapshot: ExecutionBlueprint, node: BlueprintNode,
                      validator: Validator | None = None, attempt: int = 1,
                      declared: tuple[str, ...] = ()) -> Message:
    def fail(code, description, context=""):
        return assistance(snapshot, node, code, description, context, attempt, VALIDATE)

    if not payload.strip():
        return fail(StatusCode.INCOMPLETE_INFORMATION, "tool returned an empty payload")
    if not (validator or nonempty)(payload):
        return fail(StatusCode.WRONG_INFORMATION, "payload rejected by the relevance check",
                    f"payload starts with {payload[:40]!r}")
    expected = list(node.expected_outputs) or [DEFAULT_OUTPUT]
    dependents = dependent_declarations(snapshot, node)
    names = expected + sorted({v for _, v in dependents} - set(expected))
    fields = extract_fields(payload, names, declared)
    missing = [n for n in expected if not fields.get(n)]
    if missing:
        return fail(StatusCode.INCOMPLETE_INFORMATION,
                    f"payload lacks expected outputs: {', '.join(missing)}",
                    f"fields found: {', '.join(sorted(fields)) or 'none'}")
    missing_dep = [(c, v) for c, v in dependents if not fields.get(v)]
    if missing_dep:
        return fail(StatusCode.DEPENDENCY_INCOMPLETE_INFORMATION,
                    "payload lacks values needed downstream: "
                    + ", ".join(f"{v} (for {c})" for c, v in missing_dep))
    return AgentResponse(
        StatusCode.OK,
        tuple(OutputVariable(n, fields[n]) for n in expected),
        tuple(DependentInputVariable(v, c, "text", fields[v]) for c, v in dependents),
    )


# -- all phases -----------------------------------------------------------------

def tamper(node: BlueprintNode, entry: FaultEntry, schema: ToolSchema) -> BlueprintNode:
    """Apply a request-side injected fault to a copy of ``node``."""
    ep = schema.endpoint(node.endpoint)
    if entry.behavior is FaultBehavior.WRONG_STEP:
        return replace(node, endpoint=node.endpoint + "#undeclared")
    if entry.behavior is FaultBehavior.MISSING_PARAM:
        name = entry.field or (ep.required[0] if ep and ep.required else
                               (node.params[0].name if node.params else None))
        return replace(node, params=tuple(b for b in node.params if b.name != name))
    if entry.behavior is FaultBehavior.INVALID_PARAM:
        dup = [b for b in node.params if b.name == entry.field] or list(node.params[:1])
        return replace(node, params=node.params + tuple(dup))
    return node


def execute_node(snapshot: ExecutionBlueprint, node_id: str, registry: ToolRegistry, *,
                 attempt: int = 1, timeout: float | None = None, seed: int = 0,
                 on_tool_call: Callable[[AgentRequest], None] | None = None) -> Outcome:
    node = snapshot.node(node_id)
    adapter = registry.lookup(node.tool)
    ctx = CallContext(node.id, node.tool, attempt, timeout, seed)
    hook = getattr(adapter, "request_fault", None)
    entry = hook(ctx) if hook is not None else None
    if entry is not None:
        node = tamper(node, entry, adapter.schema)

    request = prepare_request(snapshot, node, adapter.schema, attempt)
    if isinstance(request, AssistanceRequest):
        return Outcome(request, PREPARE)
    if on_tool_call is not None:
        on_tool_call(request)
    payload = invoke_tool(request, adapter, timeout, snapshot, node, ctx)
    if isinstance(payload, AssistanceRequest):
        return Outcome(payload, TOOL_CALL, request)
    ep = adapter.schema.endpoint(node.endpoint)
    declared = ep.outputs if ep is not None else ()
    return Outcome(validate_response(payload, snapshot, node, adapter.validator, attempt, declared),
                   VALIDATE, request)
