"""Fault handling: turn an assistance request into a resolution.

The default handler is a fixed decision ladder, evaluated top to bottom:

1. Retry, if the node still has retry budget and the code is 604, 605 or 607.
2. For 601, insert a predecessor step from a matching insertion recipe.
3. Substitute the next alternative tool for the node's original tool.
4. Abandon.

A node that has already received ``MAX_RESOLUTIONS`` resolutions is abandoned
outright. The ladder depends only on the request, the blueprint snapshot and
the policy, so it can be replayed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from .blueprint import BlueprintNode, ExecutionBlueprint, Replacement, ResolutionAction
from .errors import BlueprintError, SchemaViolation, UnregisteredTool
from .protocol import AssistanceRequest, ParamBinding, Resolution, StatusCode
from .tools.registry import ToolRegistry

log = logging.getLogger(__name__)

RETRYABLE = frozenset({StatusCode.TOOL_CALL_FAILURE, StatusCode.INCOMPLETE_INFORMATION,
                       StatusCode.WRONG_INFORMATION})
MAX_RESOLUTIONS = 3

Resolver = Callable[[AssistanceRequest, ExecutionBlueprint], "ResolutionAction | None"]


@dataclass(frozen=True)
class InsertionRecipe:
    """Predecessor step to add when ``tool`` is missing ``missing_param``.

    ``node_template`` keys: ``step`` (id suffix), ``tool``, ``method``,
    ``endpoint``, ``params`` and ``expected_outputs``; optional ``provides``
    lists which outputs get wired into the failing node (default: all
    expected outputs). Template params may use origin ``Inherit`` with a
    ``param`` key to copy the failing node's binding of that parameter.
    """

    tool: str
    missing_param: str
    node_template: Mapping[str, Any]

    def __post_init__(self):
        for key in ("step", "tool", "endpoint", "expected_outputs"):
            if key not in self.node_template:
                raise SchemaViolation(f"node_template.{key}", "missing field")


@dataclass(frozen=True)
class ReroutePolicy:
    alternatives: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    insertion_recipes: tuple[InsertionRecipe, ...] = ()

    def validate(self, registry: ToolRegistry) -> None:
        """Every substitute and recipe tool must be registered."""
        for subs in self.alternatives.values():
            for t in subs:
                if t not in registry:
                    raise UnregisteredTool(t)
        for r in self.insertion_recipes:
            if r.node_template["tool"] not in registry:
                raise UnregisteredTool(r.node_template["tool"])

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReroutePolicy":
        return cls(
            alternatives={k: tuple(v) for k, v in d.get("alternatives", {}).items()},
            insertion_recipes=tuple(
                InsertionRecipe(r["tool"], r["missing_param"], r["node_template"])
                for r in d.get("insertion_recipes", [])
            ),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ReroutePolicy":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "alternatives": {k: list(v) for k, v in self.alternatives.items()},
            "insertion_recipes": [
                {"tool": r.tool, "missing_param": r.missing_param, "node_template": dict(r.node_template)}
                for r in self.insertion_recipes
            ],
        }


def _unique_id(snapshot: ExecutionBlueprint, base: str) -> str:
    candidate, k = base, 2
    while candidate in snapshot:
        candidate, k = f"{base}_{k}", k + 1
    return candidate


def _template_binding(p: Mapping, node: BlueprintNode) -> ParamBinding | None:
    origin = p.get("origin", "Literal").capitalize()
    if origin == "Inherit":
        for b in node.params:
            if b.name == p["param"]:
                return ParamBinding(p["name"], b.origin, b.literal_value, b.source)
        return None
    if origin == "Dependency":
        return ParamBinding.dependency(p["name"], p["source"]["node"], p["source"]["output"])
    return ParamBinding.literal(p["name"], p["value"])


def insertion_action(recipe: InsertionRecipe, node: BlueprintNode,
                     snapshot: ExecutionBlueprint) -> ResolutionAction:
    t = recipe.node_template
    base = f"{node.subtask}.{t['step']}" if node.subtask else str(t["step"])
    new_id = _unique_id(snapshot, base)
    params = tuple(b for b in (_template_binding(p, node) for p in t.get("params", [])) if b is not None)
    inserted = BlueprintNode(
        id=new_id, subtask=node.subtask, tool=t["tool"], method=t.get("method", "FUNCTION"),
        endpoint=t["endpoint"], params=params, expected_outputs=tuple(t["expected_outputs"]),
        agent=t.get("agent"),
    )
    bound = {b.name for b in node.params}
    wired = tuple(ParamBinding.dependency(p, new_id, p)
                  for p in t.get("provides", t["expected_outputs"]) if p not in bound)
    return ResolutionAction(
        Resolution.REROUTE, node.id,
        f"ladder 2: insert {new_id} to obtain {recipe.missing_param}",
        replacement=Replacement(node.tool, node.method, node.endpoint, node.params + wired),
        inserted=inserted,
    )


def next_alternative(node: BlueprintNode, policy: ReroutePolicy) -> str | None:
    chain = tuple(policy.alternatives.get(node.origin_tool, ()))
    start = chain.index(node.tool) + 1 if node.tool in chain else 0
    for t in chain[start:]:
        if t != node.tool and t != node.origin_tool:
            return t
    return None


def handle_assistance(req: AssistanceRequest, snapshot: ExecutionBlueprint,
                      policy: ReroutePolicy | None = None) -> ResolutionAction:
    policy = policy or ReroutePolicy()
    node = snapshot.node(req.error_node)
    code = StatusCode(req.error)

    if node.resolutions >= MAX_RESOLUTIONS:
        return ResolutionAction.abandon(node.id, f"resolution cap ({MAX_RESOLUTIONS}) reached")
    if node.retries_remaining > 0 and code in RETRYABLE:
        return ResolutionAction.retry(node.id, f"ladder 1: retry after {code.label}")
    if code is StatusCode.MISSING_REQUIRED_PARAMETERS:
        bound = {b.name for b in node.params}
        for recipe in policy.insertion_recipes:
            if recipe.tool == node.tool and recipe.missing_param not in bound:
                return insertion_action(recipe, node, snapshot)
    alt = next_alternative(node, policy)
    if alt is not None:
        return ResolutionAction(
            Resolution.REROUTE, node.id, f"ladder 3: substitute {alt} for {node.tool}",
            replacement=Replacement(alt, node.method, node.endpoint, node.params),
        )
    return ResolutionAction.abandon(node.id, f"ladder 4: no workaround for {code.label}")


def resolve(req: AssistanceRequest, bp: ExecutionBlueprint, policy: ReroutePolicy | None = None,
            resolver: Resolver | None = None) -> ResolutionAction:
    """Decide and apply exactly one resolution for ``req`` on ``bp``.

    ``resolver`` is an optional override (e.g. an LLM-backed policy); when it
    returns None the ladder decides. An action the blueprint rejects (for
    example a Reroute that would close a cycle) is downgraded to Abandon.
    Returns the action actually applied.
    """
    action = resolver(req, bp.snapshot()) if resolver is not None else None
    if action is None:
        action = handle_assistance(req, bp.snapshot(), policy)
    try:
        bp.apply_resolution(action)
    except BlueprintError as exc:
        log.warning("%s: %s; abandoning instead", req.error_node, exc)
        action = ResolutionAction.abandon(req.error_node, f"{action.action.value} rejected: {exc}")
        bp.apply_resolution(action)
    return action
