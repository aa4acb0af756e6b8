"""The execution blueprint: a DAG of tool invocations plus their stored outputs."""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping

from .errors import (
    CycleDetected,
    DanglingDependencyBinding,
    DanglingEdge,
    DuplicateNode,
    InputError,
    InvalidTransition,
    NodeNotRunning,
    RerouteCreatesCycle,
    RetryBudgetExhausted,
    SchemaViolation,
    UnknownNode,
)
from .protocol import AgentResponse, Origin, ParamBinding, Resolution, StatusCode

DEFAULT_RETRY_BUDGET = 2


class NodeStatus(str, Enum):
    PENDING = "Pending"
    READY = "Ready"
    RUNNING = "Running"
    SUCCEEDED = "Succeeded"
    FAILED = "Failed"
    SKIPPED = "Skipped"

    @property
    def terminal(self) -> bool:
        return self in (NodeStatus.SUCCEEDED, NodeStatus.FAILED, NodeStatus.SKIPPED)


_P, _RD, _RN, _S, _F, _SK = NodeStatus
# Running -> Ready / Pending are the Retry and Reroute paths.
_TRANSITIONS = {
    _P: {_RD, _SK, _F},
    _RD: {_RN, _SK, _F},
    _RN: {_S, _F, _RD, _P},
    _S: set(),
    _F: set(),
    _SK: set(),
}


@dataclass(frozen=True)
class BlueprintNode:
    id: str
    subtask: str
    tool: str
    method: str
    endpoint: str
    params: tuple[ParamBinding, ...] = ()
    expected_outputs: tuple[str, ...] = ()
    status: NodeStatus = NodeStatus.PENDING
    retries_remaining: int = DEFAULT_RETRY_BUDGET
    agent: str | None = None
    origin_tool: str | None = None
    resolutions: int = 0
    last_error: int | None = None

    def __post_init__(self):
        if not self.id:
            raise SchemaViolation("id", "node id must be non-empty")
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "expected_outputs", tuple(self.expected_outputs))
        object.__setattr__(self, "status", NodeStatus(self.status))
        if len(set(self.expected_outputs)) != len(self.expected_outputs):
            raise SchemaViolation(f"{self.id}.expected_outputs", "duplicate output name")
        if self.retries_remaining < 0:
            raise SchemaViolation(f"{self.id}.retries_remaining", "must be non-negative")
        if self.origin_tool is None:
            object.__setattr__(self, "origin_tool", self.tool)

    def dependencies(self) -> list[tuple[str, str]]:
        return [b.source for b in self.params if b.origin is Origin.DEPENDENCY]


@dataclass(frozen=True)
class Replacement:
    """New tool binding for a rerouted node. Expected outputs are kept as-is."""

    tool: str
    method: str
    endpoint: str
    params: tuple[ParamBinding, ...]

    def __post_init__(self):
        if not (self.tool and self.method and self.endpoint):
            raise SchemaViolation("replacement", "tool, method and endpoint are required")
        object.__setattr__(self, "params", tuple(self.params))


@dataclass(frozen=True)
class ResolutionAction:
    action: Resolution
    node_id: str
    rationale: str = ""
    replacement: Replacement | None = None
    inserted: BlueprintNode | None = None

    def __post_init__(self):
        object.__setattr__(self, "action", Resolution(self.action))
        if self.action is Resolution.REROUTE and self.replacement is None:
            raise SchemaViolation("replacement", "Reroute needs a complete replacement binding")

    @classmethod
    def retry(cls, node_id: str, rationale: str = "") -> "ResolutionAction":
        return cls(Resolution.RETRY, node_id, rationale)

    @classmethod
    def abandon(cls, node_id: str, rationale: str = "") -> "ResolutionAction":
        return cls(Resolution.ABANDON, node_id, rationale)


def find_cycle(node_ids: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[str] | None:
    """Return one cycle as ``[v0, v1, ..., v0]`` or None if the graph is acyclic."""
    succ: dict[str, list[str]] = {n: [] for n in node_ids}
    for u, v in edges:
        succ.setdefault(u, []).append(v)
        succ.setdefault(v, [])
    for n in succ:
        succ[n].sort()
    white, grey, black = 0, 1, 2
    color = dict.fromkeys(succ, white)
    for root in sorted(succ):
        if color[root] != white:
            continue
        stack = [(root, iter(succ[root]))]
        path = [root]
        color[root] = grey
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = black
                stack.pop()
                path.pop()
            elif color[nxt] == grey:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == white:
                color[nxt] = grey
                stack.append((nxt, iter(succ[nxt])))
                path.append(nxt)
    return None


class ExecutionBlueprint:
    """Global task DAG with per-node status and the shared output store.

    Only the scheduler mutates a blueprint. Executors work on ``snapshot()``
    copies. Every mutating method validates before touching state, so a
    failed call leaves the blueprint unchanged.
    """

    def __init__(self, goal: str, nodes: Mapping[str, BlueprintNode], edges: Iterable[tuple[str, str]],
                 output_store: Mapping[tuple[str, str], str] | None = None):
        self.goal = goal
        self._nodes = dict(nodes)
        self._edges = set(edges)
        self.output_store: dict[tuple[str, str], str] = dict(output_store or {})
        self._index()

    def _index(self):
        self._succ: dict[str, set[str]] = {n: set() for n in self._nodes}
        self._pred: dict[str, set[str]] = {n: set() for n in self._nodes}
        for u, v in self._edges:
            self._succ[u].add(v)
            self._pred[v].add(u)

    # -- read access --------------------------------------------------------

    @property
    def nodes(self) -> Mapping[str, BlueprintNode]:
        return dict(self._nodes)

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return frozenset(self._edges)

    def __len__(self):
        return len(self._nodes)

    def __contains__(self, node_id):
        return node_id in self._nodes

    def node(self, node_id: str) -> BlueprintNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(f"unknown node {node_id!r}") from None

    def predecessors(self, node_id: str) -> set[str]:
        self.node(node_id)
        return set(self._pred[node_id])

    def successors(self, node_id: str) -> set[str]:
        self.node(node_id)
        return set(self._succ[node_id])

    def status(self, node_id: str) -> NodeStatus:
        return self.node(node_id).status

    def ids_with_status(self, *statuses: NodeStatus) -> list[str]:
        return sorted(n for n, node in self._nodes.items() if node.status in statuses)

    def snapshot(self) -> "ExecutionBlueprint":
        return ExecutionBlueprint(self.goal, self._nodes, self._edges, self.output_store)

    def replace_node(self, node: BlueprintNode) -> None:
        """Swap in a modified copy of an existing node (used on snapshots)."""
        self.node(node.id)
        self._nodes[node.id] = node

    def __eq__(self, other):
        if not isinstance(other, ExecutionBlueprint):
            return NotImplemented
        return (self.goal == other.goal and self._nodes == other._nodes
                and self._edges == other._edges and self.output_store == other.output_store)

    def __repr__(self):
        return f"ExecutionBlueprint(goal={self.goal!r}, nodes={len(self._nodes)}, edges={len(self._edges)})"

    # -- structure ----------------------------------------------------------

    def topological_layers(self) -> list[list[str]]:
        """Group nodes by the length of their longest predecessor chain."""
        depth: dict[str, int] = {}
        indeg = {n: len(p) for n, p in self._pred.items()}
        queue = deque(sorted(n for n, d in indeg.items() if d == 0))
        for n in queue:
            depth[n] = 0
        while queue:
            u = queue.popleft()
            for v in sorted(self._succ[u]):
                depth[v] = max(depth.get(v, 0), depth[u] + 1)
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
        layers: list[list[str]] = [[] for _ in range(max(depth.values(), default=-1) + 1)]
        for n, d in depth.items():
            layers[d].append(n)
        return [sorted(layer) for layer in layers]

    def descendants(self, node_id: str) -> set[str]:
        self.node(node_id)
        seen: set[str] = set()
        queue = deque(self._succ[node_id])
        while queue:
            n = queue.popleft()
            if n not in seen:
                seen.add(n)
                queue.extend(self._succ[n])
        return seen

    # -- data flow ----------------------------------------------------------

    def lookup(self, consumer: str, source: tuple[str, str]) -> str | None:
        """Value for a dependency binding: the producer's output, else a dependent input pushed to the consumer."""
        node, output = source
        value = self.output_store.get((node, output))
        if value is None:
            value = self.output_store.get((consumer, output))
        return value

    def resolve_inputs(self, node_id: str, required: Iterable[str] = (),
                       formats: Mapping[str, str] | None = None) -> list[tuple[str, str]]:
        """Concrete ``(param, value)`` pairs for a node.

        Raises InputError with code 603 for a duplicated parameter or a value
        that fails its declared format, and 601 for a required parameter that
        is unbound, empty, or whose producing output is absent.
        """
        node = self.node(node_id)
        seen = set()
        for b in node.params:
            if b.name in seen:
                raise InputError(StatusCode.INVALID_PARAMETER_USAGE, b.name,
                                 f"parameter {b.name!r} is bound more than once")
            seen.add(b.name)
        missing = [p for p in required if p not in seen]
        if missing:
            raise InputError(StatusCode.MISSING_REQUIRED_PARAMETERS, missing[0],
                             f"required parameters missing: {', '.join(missing)}")
        resolved = []
        for b in node.params:
            if b.origin is Origin.LITERAL:
                value = b.literal_value
                where = "literal value"
            else:
                value = self.lookup(node_id, b.source)
                where = f"output {b.source[0]}.{b.source[1]}"
            if not value:
                raise InputError(StatusCode.MISSING_REQUIRED_PARAMETERS, b.name,
                                 f"parameter {b.name!r}: {where} is absent or empty")
            pattern = (formats or {}).get(b.name)
            if pattern is not None and not re.fullmatch(pattern, value):
                raise InputError(StatusCode.INVALID_PARAMETER_USAGE, b.name,
                                 f"parameter {b.name!r} does not match format {pattern!r}")
            resolved.append((b.name, value))
        return resolved

    def store_output(self, node_id: str, response: AgentResponse) -> "ExecutionBlueprint":
        node = self.node(node_id)
        if node.status is not NodeStatus.RUNNING:
            raise NodeNotRunning(f"node {node_id!r} is {node.status.value}, not Running")
        if response.status is not StatusCode.OK:
            raise ValueError("only 200 responses can be stored")
        for dep in response.dependent_inputs:
            self.node(dep.target_node)
        for out in response.outputs:
            self.output_store[(node_id, out.name)] = out.content
        for dep in response.dependent_inputs:
            self.output_store[(dep.target_node, dep.name)] = dep.content
        self._nodes[node_id] = replace(node, status=NodeStatus.SUCCEEDED)
        return self

    # -- status -------------------------------------------------------------

    def set_status(self, node_id: str, status: NodeStatus) -> None:
        node = self.node(node_id)
        status = NodeStatus(status)
        if status not in _TRANSITIONS[node.status]:
            raise InvalidTransition(f"{node_id}: {node.status.value} -> {status.value}")
        self._nodes[node_id] = replace(node, status=status)

    def record_error(self, node_id: str, code: int) -> None:
        self._nodes[node_id] = replace(self.node(node_id), last_error=int(code))

    # -- fault recovery -----------------------------------------------------

    def apply_resolution(self, action: ResolutionAction) -> "ExecutionBlueprint":
        node = self.node(action.node_id)
        if node.status.terminal:
            raise InvalidTransition(f"cannot resolve {node.id}: already {node.status.value}")
        counted = replace(node, resolutions=node.resolutions + 1)

        if action.action is Resolution.RETRY:
            if node.retries_remaining <= 0:
                raise RetryBudgetExhausted(f"node {node.id!r} has no retries left")
            self._check_transition(node, NodeStatus.READY)
            self._nodes[node.id] = replace(counted, status=NodeStatus.READY,
                                           retries_remaining=node.retries_remaining - 1)
            return self

        if action.action is Resolution.ABANDON:
            self._check_transition(node, NodeStatus.FAILED)
            self._nodes[node.id] = replace(counted, status=NodeStatus.FAILED)
            for d in self.descendants(node.id):
                dn = self._nodes[d]
                if dn.status in (NodeStatus.PENDING, NodeStatus.READY):
                    self._nodes[d] = replace(dn, status=NodeStatus.SKIPPED)
            return self

        # Reroute
        rep = action.replacement
        nodes = dict(self._nodes)
        edges = set(self._edges)
        if action.inserted is not None:
            new = replace(action.inserted, status=NodeStatus.PENDING)
            if new.id in nodes:
                raise DuplicateNode(f"inserted node {new.id!r} already exists")
            nodes[new.id] = new
            for src, _ in new.dependencies():
                edges.add((src, new.id))
            edges.add((new.id, node.id))
        rerouted = replace(counted, tool=rep.tool, method=rep.method, endpoint=rep.endpoint,
                           params=rep.params, status=NodeStatus.PENDING)
        nodes[node.id] = rerouted
        for src, _ in rerouted.dependencies():
            edges.add((src, node.id))
        for n in nodes.values():
            for src, out in n.dependencies():
                if src not in nodes:
                    raise DanglingDependencyBinding(f"{n.id}: binds to unknown node {src!r}")
        cycle = find_cycle(nodes, edges)
        if cycle:
            raise RerouteCreatesCycle(cycle)
        self._check_transition(node, NodeStatus.PENDING)
        self._nodes = nodes
        self._edges = edges
        self._index()
        return self

    @staticmethod
    def _check_transition(node: BlueprintNode, target: NodeStatus):
        if target not in _TRANSITIONS[node.status]:
            raise InvalidTransition(f"{node.id}: {node.status.value} -> {target.value}")


def build(goal: str, nodes: Iterable[BlueprintNode], edges: Iterable[tuple[str, str]]) -> ExecutionBlueprint:
    """Validate nodes and edges and return a blueprint with every node Pending."""
    by_id: dict[str, BlueprintNode] = {}
    for n in nodes:
        if n.id in by_id:
            raise DuplicateNode(f"duplicate node id {n.id!r}")
        by_id[n.id] = replace(n, status=NodeStatus.PENDING, resolutions=0, last_error=None)
    edge_set = set()
    for u, v in edges:
        for end in (u, v):
            if end not in by_id:
                raise DanglingEdge(f"edge {u} -> {v} references unknown node {end!r}")
        edge_set.add((u, v))
    cycle = find_cycle(by_id, edge_set)
    if cycle:
        raise CycleDetected(cycle)
    for n in by_id.values():
        for src, out in n.dependencies():
            if src not in by_id:
                raise DanglingDependencyBinding(f"{n.id}: binds to unknown node {src!r}")
            if (src, n.id) not in edge_set:
                raise DanglingDependencyBinding(f"{n.id}: binds to {src}.{out} without an edge {src} -> {n.id}")
    return ExecutionBlueprint(goal, by_id, edge_set)


# ---------------------------------------------------------------------------
# JSON file format
# ---------------------------------------------------------------------------

def binding_to_dict(b: ParamBinding) -> dict[str, Any]:
    if b.origin is Origin.LITERAL:
        return {"name": b.name, "origin": "Literal", "value": b.literal_value}
    return {"name": b.name, "origin": "Dependency", "source": {"node": b.source[0], "output": b.source[1]}}


def node_to_dict(n: BlueprintNode) -> dict[str, Any]:
    d: dict[str, Any] = {
        "id": n.id,
        "subtask": n.subtask,
        "tool": n.tool,
        "method": n.method,
        "endpoint": n.endpoint,
        "params": [binding_to_dict(b) for b in n.params],
        "expected_outputs": list(n.expected_outputs),
    }
    if n.agent is not None:
        d["agent"] = n.agent
    if n.retries_remaining != DEFAULT_RETRY_BUDGET:
        d["retries"] = n.retries_remaining
    return d


def blueprint_to_dict(bp: ExecutionBlueprint) -> dict[str, Any]:
    return {
        "goal": bp.goal,
        "nodes": [node_to_dict(bp.node(n)) for n in sorted(bp.nodes)],
        "edges": [[u, v] for u, v in sorted(bp.edges)],
    }


@dataclass
class _Reader:
    """Small helper that reports field paths for malformed blueprint documents."""

    errors: list[str] = field(default_factory=list)

    def get(self, obj, key, typ, path, default=...):
        if not isinstance(obj, dict):
            raise SchemaViolation(path, "expected an object")
        if key not in obj:
            if default is not ...:
                return default
            raise SchemaViolation(f"{path}.{key}" if path else key, "missing field")
        value = obj[key]
        if not isinstance(value, typ) or isinstance(value, bool) and typ is not bool:
            raise SchemaViolation(f"{path}.{key}" if path else key, f"expected {getattr(typ, '__name__', typ)}")
        return value


def binding_from_dict(d: Any, path: str) -> ParamBinding:
    r = _Reader()
    name = r.get(d, "name", str, path)
    origin = r.get(d, "origin", str, path).capitalize()
    if origin == "Literal":
        return ParamBinding.literal(name, r.get(d, "value", str, path))
    if origin == "Dependency":
        src = r.get(d, "source", dict, path)
        return ParamBinding.dependency(name, r.get(src, "node", str, f"{path}.source"),
                                       r.get(src, "output", str, f"{path}.source"))
    raise SchemaViolation(f"{path}.origin", f"unknown origin {origin!r}")


def node_from_dict(d: Any, path: str) -> BlueprintNode:
    r = _Reader()
    params = r.get(d, "params", list, path, [])
    return BlueprintNode(
        id=r.get(d, "id", str, path),
        subtask=r.get(d, "subtask", str, path, ""),
        tool=r.get(d, "tool", str, path),
        method=r.get(d, "method", str, path, "FUNCTION"),
        endpoint=r.get(d, "endpoint", str, path),
        params=tuple(binding_from_dict(p, f"{path}.params[{i}]") for i, p in enumerate(params)),
        expected_outputs=tuple(r.get(d, "expected_outputs", list, path, [])),
        retries_remaining=r.get(d, "retries", int, path, DEFAULT_RETRY_BUDGET),
        agent=r.get(d, "agent", str, path, None),
    )


def blueprint_from_dict(d: Any) -> ExecutionBlueprint:
    r = _Reader()
    goal = r.get(d, "goal", str, "")
    nodes = [node_from_dict(n, f"nodes[{i}]") for i, n in enumerate(r.get(d, "nodes", list, ""))]
    edges = []
    for i, e in enumerate(r.get(d, "edges", list, "", [])):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, str) for x in e)):
            raise SchemaViolation(f"edges[{i}]", "expected [from, to]")
        edges.append((e[0], e[1]))
    return build(goal, nodes, edges)


# ---------------------------------------------------------------------------
# Run state (final blueprint + statuses + store), for decoupling run and render
# ---------------------------------------------------------------------------

def export_state(bp: ExecutionBlueprint) -> dict[str, Any]:
    return {
        "blueprint": blueprint_to_dict(bp),
        "status": {n: bp.node(n).status.value for n in sorted(bp.nodes)},
        "errors": {n: bp.node(n).last_error for n in sorted(bp.nodes) if bp.node(n).last_error is not None},
        "resolutions": {n: bp.node(n).resolutions for n in sorted(bp.nodes) if bp.node(n).resolutions},
        "origin_tools": {n: bp.node(n).origin_tool for n in sorted(bp.nodes)
                         if bp.node(n).origin_tool != bp.node(n).tool},
        "store": [{"node": k[0], "name": k[1], "content": v} for k, v in sorted(bp.output_store.items())],
    }


def import_state(d: Mapping[str, Any]) -> ExecutionBlueprint:
    base = blueprint_from_dict(d["blueprint"])
    status = d.get("status", {})
    errors = d.get("errors", {})
    resolutions = d.get("resolutions", {})
    origins = d.get("origin_tools", {})
    nodes = {
        n: replace(base.node(n), status=NodeStatus(status.get(n, "Pending")), last_error=errors.get(n),
                   resolutions=resolutions.get(n, 0), origin_tool=origins.get(n, base.node(n).tool))
        for n in base.nodes
    }
    store = {(s["node"], s["name"]): s["content"] for s in d.get("store", [])}
    return ExecutionBlueprint(base.goal, nodes, base.edges, store)
