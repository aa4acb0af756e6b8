import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acp_runtime import (
    EventKind,
    ExecutionPolicy,
    ExecutionReport,
    Mode,
    NodeStatus,
    build,
    emit_trace,
    ready_set,
    run,
)
from acp_runtime.errors import UnregisteredTool
from acp_runtime.planner import bundled, load_blueprint
from acp_runtime.tools import FaultEntry, FaultPlan, default_registry, inject
from acp_runtime.trace import ExecutionTrace, render_timeline
from helpers import closure, fresh_rng, mix_node, mix_registry, random_blueprint, topo_violations


def diamond():
    return load_blueprint(bundled("diamond.json"))


def faulty(registry, *entries):
    plan = FaultPlan(tuple(FaultEntry(*e) for e in entries))
    return registry.map(lambda a: inject(plan, a))


def kinds(trace, node):
    return [e.kind.value for e in trace.for_node(node)]


# -- ready set ----------------------------------------------------------------------


def test_ready_set_diamond():
    bp = diamond()
    assert ready_set(bp) == ["a"]
    for s in ("Ready", "Running", "Succeeded"):
        bp.set_status("a", NodeStatus(s))
    assert ready_set(bp) == ["b", "c"]


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_ready_set_matches_filter(seed):
    rng = fresh_rng(seed)
    bp = random_blueprint(rng, rng.randint(1, 9))
    for nid in sorted(bp.nodes):
        roll = rng.random()
        if roll < 0.5 and all(bp.status(p) is NodeStatus.SUCCEEDED for p in bp.predecessors(nid)):
            for s in ("Ready", "Running", "Succeeded"):
                bp.set_status(nid, NodeStatus(s))
        elif roll < 0.6:
            bp.set_status(nid, NodeStatus.SKIPPED)
    edges = bp.edges
    expected = sorted(
        n for n in bp.nodes
        if bp.status(n) is NodeStatus.PENDING
        and all(bp.status(u) is NodeStatus.SUCCEEDED for (u, v) in edges if v == n)
    )
    assert ready_set(bp) == expected


# -- policy ---------------------------------------------------------------------------


def test_single_agent_forces_one_worker():
    assert ExecutionPolicy(Mode.SINGLE_AGENT, worker_count=8).worker_count == 1


def test_policy_rejects_zero_workers():
    with pytest.raises(ValueError):
        ExecutionPolicy(worker_count=0)


@pytest.mark.parametrize("text,mode", [("fullacp", Mode.FULL_ACP), ("noassist", Mode.NO_ASSISTANCE),
                                       ("single", Mode.SINGLE_AGENT), ("FullACP", Mode.FULL_ACP)])
def test_mode_parse(text, mode):
    assert Mode.parse(text) is mode


# -- diamond runs ----------------------------------------------------------------------


@pytest.mark.parametrize("mode", list(Mode))
@pytest.mark.parametrize("workers", [1, 3])
def test_diamond_all_succeed(mode, workers):
    final, trace, report = run(diamond(), default_registry(), ExecutionPolicy(mode, workers))
    assert report.completion_rate == 1.0
    assert (report.succeeded, report.failed, report.skipped, report.total) == (4, 0, 0, 4)
    assert final.output_store[("d", "text")] == "5 and 2"
    assert not topo_violations(trace, final)
    d_start = trace.for_node("d")[0].seq
    assert all(trace.for_node(n)[-1].seq < d_start for n in "bc")
    assert not trace.of_kind(EventKind.RESOLUTION_APPLIED)


def test_input_blueprint_untouched():
    bp = diamond()
    before = bp.snapshot()
    run(bp, default_registry())
    assert bp == before


def test_noassist_localizes_fault_at_b():
    reg = faulty(default_registry(), ("b", 1, "Throw"))
    final, trace, report = run(diamond(), reg, ExecutionPolicy(Mode.NO_ASSISTANCE))
    assert final.ids_with_status(NodeStatus.SUCCEEDED) == ["a", "c"]
    assert final.ids_with_status(NodeStatus.FAILED) == ["b"]
    assert final.ids_with_status(NodeStatus.SKIPPED) == ["d"]
    assert report.completion_rate == 0.5
    assert set(final.ids_with_status(NodeStatus.SKIPPED)) == closure(final.nodes, final.edges)["b"]
    assert not trace.of_kind(EventKind.ASSISTANCE_POSTED)


def test_fullacp_retries_transient_fault():
    reg = faulty(default_registry(), ("b", 1, "Throw"))
    final, trace, report = run(diamond(), reg, ExecutionPolicy(Mode.FULL_ACP))
    assert report.completion_rate == 1.0
    assert kinds(trace, "b") == ["Dispatched", "ToolCalled", "ErrorRaised", "AssistancePosted",
                                 "ResolutionApplied", "Dispatched", "ToolCalled", "Succeeded"]
    err = trace.of_kind(EventKind.ERROR_RAISED)[0]
    assert err.code == 604
    assert trace.of_kind(EventKind.RESOLUTION_APPLIED)[0].action == "Retry"
    assert final.node("b").retries_remaining == 1


def test_fullacp_abandons_after_budget():
    reg = faulty(default_registry(), *[("b", k, "Throw") for k in (1, 2, 3)])
    final, trace, report = run(diamond(), reg, ExecutionPolicy(Mode.FULL_ACP))
    actions = [e.action for e in trace.of_kind(EventKind.RESOLUTION_APPLIED)]
    assert actions == ["Retry", "Retry", "Abandon"]
    assert report.completion_rate == 0.5


def test_single_agent_stops_at_first_failure():
    reg = faulty(default_registry(), ("b", 1, "Throw"))
    final, trace, report = run(diamond(), reg, ExecutionPolicy(Mode.SINGLE_AGENT))
    assert final.ids_with_status(NodeStatus.SUCCEEDED) == ["a"]
    assert final.ids_with_status(NodeStatus.SKIPPED) == ["c", "d"]
    assert report.completion_rate == 0.25


def test_unregistered_tool_preflight():
    with pytest.raises(UnregisteredTool) as info:
        run(load_blueprint(bundled("bad_tool.json")), default_registry())
    assert "weather-oracle" in str(info.value)


# -- trace properties --------------------------------------------------------------------


def test_single_node_trace():
    bp = build("g", [mix_node("n00", [])], [])
    _, trace, _ = run(bp, mix_registry())
    assert [e.kind.value for e in trace] == ["Dispatched", "ToolCalled", "Succeeded"]


def test_parallel_dispatch_before_completion():
    bp = build("g", [mix_node("n00", []), mix_node("n01", [])], [])
    _, trace, _ = run(bp, mix_registry(delay=0.03), ExecutionPolicy(worker_count=2))
    dispatched = [e.seq for e in trace.of_kind(EventKind.DISPATCHED)]
    succeeded = [e.seq for e in trace.of_kind(EventKind.SUCCEEDED)]
    assert len(dispatched) == 2 and max(dispatched) < min(succeeded)


def test_trace_is_replayable():
    reg = faulty(default_registry(), ("b", 1, "Throw"))
    texts = [emit_trace(run(diamond(), reg, ExecutionPolicy(worker_count=1, random_seed=7)).trace)
             for _ in range(2)]
    assert texts[0] == texts[1]
    assert "elapsed" not in texts[0]


def test_trace_json_round_trip():
    _, trace, _ = run(diamond(), default_registry())
    back = ExecutionTrace.from_json(trace.to_json())
    assert back.to_list() == trace.to_list()
    wall = json.loads(trace.to_json(wall=True))
    assert all("elapsed_ms" in e for e in wall)


def test_timeline_rows():
    reg = faulty(default_registry(), ("b", 1, "Throw"))
    _, trace, _ = run(diamond(), reg, ExecutionPolicy(Mode.NO_ASSISTANCE))
    lines = render_timeline(trace).splitlines()
    rows = {line.split("|")[0].strip(): line.split("|")[1] for line in lines[1:-1]}
    assert set(rows) == {"a", "b", "c", "d"}
    assert rows["a"].strip() == "S"
    assert "F" in rows["b"] and "x" in rows["d"]
    assert render_timeline(trace, clock="wall", bucket_ms=10).splitlines()[-1].startswith("(columns: 10ms)")


def test_secrets_are_redacted_in_trace():
    from acp_runtime import BlueprintNode, ParamBinding
    from acp_runtime.tools import Endpoint, FunctionAdapter, ToolRegistry, ToolSchema
    schema = ToolSchema("search", (Endpoint("q", required=("query", "api_key")),))
    seen = []
    adapter = FunctionAdapter(schema, lambda body: seen.append(body) or "result")
    node = BlueprintNode("s", "t", "search", "FUNCTION", "q",
                         (ParamBinding.literal("query", "x"), ParamBinding.literal("api_key", "s3cret")))
    _, trace, _ = run(build("g", [node], []), ToolRegistry([adapter]))
    called = trace.of_kind(EventKind.TOOL_CALLED)[0].detail
    assert "s3cret" not in called and "***" in called
    assert seen[0]["api_key"] == "s3cret"


# -- random runs -------------------------------------------------------------------------


@given(st.integers(0, 10_000), st.sampled_from(list(Mode)), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_random_runs_are_safe_and_exact(seed, mode, workers):
    rng = fresh_rng(seed)
    bp = random_blueprint(rng, rng.randint(1, 10), p=0.3, aux_prob=0.2)
    plan = FaultPlan.random(bp.nodes, 0.3, seed)
    final, trace, report = run(bp, mix_registry().map(lambda a: inject(plan, a)),
                               ExecutionPolicy(mode, workers, random_seed=seed))
    assert not topo_violations(trace, final)
    assert not final.ids_with_status(NodeStatus.PENDING, NodeStatus.READY, NodeStatus.RUNNING)
    counts = Counter(n.status for n in final.nodes.values())
    assert report.succeeded == counts[NodeStatus.SUCCEEDED]
    assert report.total == len(final)
    if mode is Mode.FULL_ACP:
        assert len(trace.of_kind(EventKind.ASSISTANCE_POSTED)) == len(trace.of_kind(EventKind.RESOLUTION_APPLIED))
        assert report.completion_rate == 1.0
    # each succeeded node stored all expected outputs
    for nid in final.ids_with_status(NodeStatus.SUCCEEDED):
        for out in final.node(nid).expected_outputs:
            assert (nid, out) in final.output_store


def test_report_json_fields():
    _, _, report = run(diamond(), default_registry())
    d = json.loads(report.to_json())
    assert set(d) == {"succeeded", "failed", "skipped", "total", "completion_rate", "wall_ms"}
    assert isinstance(report, ExecutionReport)
