"""Runtime for multi-agent workflows executed as persistent dependency DAGs.

Typical use::

    from acp_runtime import load_blueprint, run, ExecutionPolicy
    from acp_runtime.tools import default_registry

    bp = load_blueprint("diamond.json")
    final, trace, report = run(bp, default_registry(), ExecutionPolicy(worker_count=2))
"""

from .blueprint import (
    BlueprintNode,
    ExecutionBlueprint,
    NodeStatus,
    Replacement,
    ResolutionAction,
    build,
    export_state,
    import_state,
)
from .coordinator import aggregate, answer_extract
from .executor import execute_node, invoke_tool, prepare_request, validate_response
from .fault import InsertionRecipe, ReroutePolicy, handle_assistance, resolve
from .planner import TaskSpec, bundled, compile, dumps_blueprint, load_blueprint, plan_via_adapter
from .protocol import (
    AgentRequest,
    AgentResponse,
    AssistanceRequest,
    DependentInputVariable,
    OutputVariable,
    ParamBinding,
    Resolution,
    Stage,
    StatusCode,
    StatusUpdate,
    SuggestedResolution,
    classify_stage,
    decode_message,
    encode_message,
)
from .scheduler import ExecutionPolicy, ExecutionReport, Mode, RunResult, ready_set, run
from .trace import EventKind, ExecutionTrace, TraceEvent, emit_trace

__all__ = [
    "AgentRequest", "AgentResponse", "aggregate", "answer_extract", "AssistanceRequest",
    "BlueprintNode", "build", "bundled", "classify_stage", "compile", "decode_message",
    "DependentInputVariable", "dumps_blueprint", "emit_trace", "encode_message", "EventKind",
    "execute_node", "ExecutionBlueprint", "ExecutionPolicy", "ExecutionReport", "ExecutionTrace",
    "export_state", "handle_assistance", "import_state", "InsertionRecipe", "invoke_tool",
    "load_blueprint", "Mode", "NodeStatus", "OutputVariable", "ParamBinding", "plan_via_adapter",
    "prepare_request", "ready_set", "Replacement", "ReroutePolicy", "Resolution",
    "ResolutionAction", "resolve", "run", "RunResult", "Stage", "StatusCode", "StatusUpdate",
    "SuggestedResolution", "TaskSpec", "TraceEvent", "validate_response",
]

__version__ = "0.1.0"
