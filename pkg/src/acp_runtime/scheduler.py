"""Drive a blueprint to completion under an execution policy."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import asdict, dataclass
from enum import Enum
from typing import NamedTuple

from .blueprint import ExecutionBlueprint, NodeStatus, ResolutionAction
from .errors import Deadlock, UnregisteredTool
from .executor import Outcome, execute_node
from .fault import ReroutePolicy, Resolver, resolve
from .protocol import (
    DEFAULT_SECRET_PATTERNS,
    AgentRequest,
    AgentResponse,
    AssistanceRequest,
    encode_message,
    redact,
)
from .tools.registry import ToolRegistry
from .trace import EventKind, ExecutionTrace

log = logging.getLogger(__name__)


class Mode(str, Enum):
    FULL_ACP = "FullACP"
    NO_ASSISTANCE = "NoAssistance"
    SINGLE_AGENT = "SingleAgent"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        aliases = {"fullacp": cls.FULL_ACP, "noassist": cls.NO_ASSISTANCE,
                   "noassistance": cls.NO_ASSISTANCE, "single": cls.SINGLE_AGENT,
                   "singleagent": cls.SINGLE_AGENT}
        try:
            return aliases[text.lower().replace("_", "").replace("-", "")]
        except KeyError:
            raise ValueError(f"unknown mode {text!r}") from None


@dataclass(frozen=True)
class ExecutionPolicy:
    mode: Mode = Mode.FULL_ACP
    worker_count: int = 1
    per_node_timeout: float | None = 30.0
    random_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.worker_count < 1:
            raise ValueError("worker_count must be positive")
        if self.mode is Mode.SINGLE_AGENT:
            object.__setattr__(self, "worker_count", 1)


@dataclass(frozen=True)
class ExecutionReport:
    succeeded: int
    failed: int
    skipped: int
    total: int
    completion_rate: float
    wall_ms: float

    @classmethod
    def from_blueprint(cls, bp: ExecutionBlueprint, wall_ms: float) -> "ExecutionReport":
        counts = {s: len(bp.ids_with_status(s)) for s in NodeStatus}
        total = len(bp)
        ok = counts[NodeStatus.SUCCEEDED]
        return cls(ok, counts[NodeStatus.FAILED], counts[NodeStatus.SKIPPED], total,
                   ok / total if total else 1.0, round(wall_ms, 3))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


class RunResult(NamedTuple):
    blueprint: ExecutionBlueprint
    trace: ExecutionTrace
    report: ExecutionReport


def ready_set(bp: ExecutionBlueprint) -> list[str]:
    """Pending nodes whose predecessors have all succeeded, ascending by id."""
    out = []
    for nid in bp.ids_with_status(NodeStatus.PENDING):
        if all(bp.status(p) is NodeStatus.SUCCEEDED for p in bp.predecessors(nid)):
            out.append(nid)
    return out


def preflight(bp: ExecutionBlueprint, registry: ToolRegistry, reroute: ReroutePolicy | None = None) -> None:
    for nid in sorted(bp.nodes):
        tool = bp.node(nid).tool
        if tool not in registry:
            raise UnregisteredTool(tool)
    if reroute is not None:
        reroute.validate(registry)


class _Run:
    def __init__(self, bp, registry, policy, reroute, resolver, secret_patterns):
        self.bp = bp
        self.registry = registry
        self.policy = policy
        self.reroute = reroute
        self.resolver = resolver
        self.patterns = secret_patterns
        self.trace = ExecutionTrace()
        self.attempts: dict[str, int] = {}
        self.tick = 0

    def record(self, node, kind, detail="", **kw):
        return self.trace.record(self.tick, node, kind, detail, **kw)

    def dispatch(self, nid: str):
        self.bp.set_status(nid, NodeStatus.RUNNING)
        attempt = self.attempts[nid] = self.attempts.get(nid, 0) + 1
        self.record(nid, EventKind.DISPATCHED, f"attempt {attempt}")
        tick = self.tick

        def on_tool_call(request: AgentRequest):
            self.trace.record(tick, nid, EventKind.TOOL_CALLED, encode_message(redact(request, self.patterns)))

        return (execute_node, self.bp.snapshot(), nid, self.registry), dict(
            attempt=attempt, timeout=self.policy.per_node_timeout,
            seed=self.policy.random_seed, on_tool_call=on_tool_call)

    def handle(self, nid: str, outcome: Outcome, assistance: bool):
        msg = outcome.message
        if isinstance(msg, AgentResponse):
            self.bp.store_output(nid, msg)
            self.record(nid, EventKind.SUCCEEDED, ", ".join(o.name for o in msg.outputs))
            return
        assert isinstance(msg, AssistanceRequest)
        self.bp.record_error(nid, msg.error)
        self.record(nid, EventKind.ERROR_RAISED, f"phase={outcome.phase} {msg.description}", code=msg.error)
        before = {n: node.status for n, node in self.bp.nodes.items()}
        if assistance:
            self.record(nid, EventKind.ASSISTANCE_POSTED,
                        f"suggested {msg.suggested_resolution.action.value}: {msg.suggested_resolution.rationale}")
            action = resolve(msg, self.bp, self.reroute, self.resolver)
        else:
            action = ResolutionAction.abandon(nid, "no assistance available")
            self.bp.apply_resolution(action)
        detail = action.rationale
        if action.inserted is not None:
            detail += f" [inserted {action.inserted.id}]"
        self.record(nid, EventKind.RESOLUTION_APPLIED, detail, action=action.action.value)
        for n in sorted(self.bp.nodes):
            if self.bp.status(n) is NodeStatus.SKIPPED and before.get(n) is not NodeStatus.SKIPPED:
                self.record(n, EventKind.SKIPPED, f"upstream {nid} failed")

    def run_graph(self):
        assistance = self.policy.mode is Mode.FULL_ACP
        inflight = {}
        with ThreadPoolExecutor(max_workers=self.policy.worker_count) as pool:
            while True:
                for nid in ready_set(self.bp):
                    self.bp.set_status(nid, NodeStatus.READY)
                for nid in self.bp.ids_with_status(NodeStatus.READY):
                    if len(inflight) >= self.policy.worker_count:
                        break
                    args, kwargs = self.dispatch(nid)
                    inflight[pool.submit(*args, **kwargs)] = nid
                if not inflight:
                    left = self.bp.ids_with_status(NodeStatus.PENDING, NodeStatus.READY, NodeStatus.RUNNING)
                    if left:
                        raise Deadlock(f"no runnable nodes but {len(left)} remain: {left[:5]}")
                    return
                done, _ = wait(inflight, return_when=FIRST_COMPLETED)
                for fut in sorted(done, key=lambda f: inflight[f]):
                    nid = inflight.pop(fut)
                    self.handle(nid, fut.result(), assistance)
                self.tick += 1

    def run_single(self):
        """One agent walks the nodes in id order, ignoring the graph, and gives up at the first failure."""
        failed = None
        for nid in sorted(self.bp.nodes):
            if self.bp.status(nid).terminal:
                continue
            if failed is not None:
                self.bp.set_status(nid, NodeStatus.SKIPPED)
                self.record(nid, EventKind.SKIPPED, f"sequence stopped at {failed}")
                continue
            self.bp.set_status(nid, NodeStatus.READY)
            args, kwargs = self.dispatch(nid)
            outcome = args[0](*args[1:], **kwargs)
            msg = outcome.message
            if isinstance(msg, AgentResponse):
                self.bp.store_output(nid, msg)
                self.record(nid, EventKind.SUCCEEDED, ", ".join(o.name for o in msg.outputs))
            else:
                self.bp.record_error(nid, msg.error)
                self.record(nid, EventKind.ERROR_RAISED, f"phase={outcome.phase} {msg.description}",
                            code=msg.error)
                self.bp.set_status(nid, NodeStatus.FAILED)
                failed = nid
            self.tick += 1


def run(bp: ExecutionBlueprint, registry: ToolRegistry, policy: ExecutionPolicy | None = None,
        reroute: ReroutePolicy | None = None, resolver: Resolver | None = None,
        secret_patterns=DEFAULT_SECRET_PATTERNS) -> RunResult:
    """Execute ``bp`` and return the final blueprint, the trace and a summary report.

    The input blueprint is not modified; the run works on its own copy.
    ``reroute`` feeds the fault handler ladder and ``resolver`` may override
    it (FullACP mode only).
    """
    policy = policy or ExecutionPolicy()
    preflight(bp, registry, reroute if policy.mode is Mode.FULL_ACP else None)
    state = _Run(bp.snapshot(), registry, policy, reroute, resolver, secret_patterns)
    t0 = time.perf_counter()
    if policy.mode is Mode.SINGLE_AGENT:
        state.run_single()
    else:
        state.run_graph()
    wall_ms = (time.perf_counter() - t0) * 1000
    report = ExecutionReport.from_blueprint(state.bp, wall_ms)
    log.info("run finished: %d/%d succeeded (%.2f)", report.succeeded, report.total, report.completion_rate)
    return RunResult(state.bp, state.trace, report)
