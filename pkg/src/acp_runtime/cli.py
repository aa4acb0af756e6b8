"""Command-line entry point: ``acp validate|run|render|plan|replay``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .blueprint import export_state, import_state, node_from_dict
from .coordinator import aggregate
from .errors import ACPError, SchemaViolation
from .fault import ReroutePolicy
from .planner import adapter_from_flag, compile, dumps_blueprint, load_blueprint, plan_via_adapter
from .scheduler import ExecutionPolicy, Mode, run
from .tools import FaultPlan, inject, load_registry
from .trace import ExecutionTrace, emit_trace, render_timeline

log = logging.getLogger("acp_runtime")

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "trace": logging.DEBUG}


def _diag(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _write(path: str | Path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def cmd_validate(args) -> int:
    path = Path(args.blueprint)
    diagnostics = []
    try:
        registry = load_registry(args.fixtures)
    except (OSError, ValueError, KeyError, ACPError) as exc:
        _diag(f"cannot load tools: {exc}")
        return 1
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        _diag(str(exc))
        return 1
    except json.JSONDecodeError as exc:
        _diag(f"{path}: line {exc.lineno}: {exc.msg}")
        return 1
    for i, n in enumerate(raw.get("nodes", []) if isinstance(raw, dict) else []):
        try:
            node = node_from_dict(n, f"nodes[{i}]")
        except SchemaViolation:
            continue  # reported by the full load below
        if node.tool not in registry:
            diagnostics.append(f"{node.id}: tool {node.tool!r} is not registered")
        elif registry.lookup(node.tool).schema.endpoint(node.endpoint) is None:
            diagnostics.append(f"{node.id}: tool {node.tool!r} has no endpoint {node.endpoint!r}")
    try:
        bp = load_blueprint(path)
    except ACPError as exc:
        diagnostics.insert(0, f"{type(exc).__name__}: {exc}")
        bp = None
    for d in diagnostics:
        _diag(d)
    if diagnostics:
        return 1
    print(f"ok: {len(bp)} nodes, {len(bp.edges)} edges, {len(bp.topological_layers())} layers")
    return 0


def cmd_run(args) -> int:
    try:
        bp = load_blueprint(args.blueprint)
        registry = load_registry(args.fixtures)
        if args.faults:
            plan = FaultPlan.load(args.faults)
            registry = registry.map(lambda a: inject(plan, a))
        reroute = ReroutePolicy.load(args.reroute) if args.reroute else None
        policy = ExecutionPolicy(Mode.parse(args.mode), args.workers, args.timeout, args.seed)
        final, trace, report = run(bp, registry, policy, reroute)
    except (ACPError, OSError, ValueError, KeyError) as exc:
        _diag(f"{type(exc).__name__}: {exc}")
        return 2
    if args.trace:
        _write(args.trace, trace.to_json())
        _write(Path(args.trace).with_suffix(".timeline.txt"), render_timeline(trace))
    if args.report:
        _write(args.report, report.to_json())
    if args.state:
        _write(args.state, json.dumps(export_state(final), indent=2, ensure_ascii=False) + "\n")
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0 if report.completion_rate == 1.0 else 1


def cmd_render(args) -> int:
    try:
        state = import_state(json.loads(Path(args.state).read_text(encoding="utf-8")))
        template = Path(args.template).read_text(encoding="utf-8")
        text = aggregate(state, template)
    except (ACPError, OSError, ValueError, KeyError) as exc:
        _diag(f"{type(exc).__name__}: {exc}")
        return 1
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_plan(args) -> int:
    try:
        registry = load_registry(args.fixtures)
        spec = plan_via_adapter(args.goal, registry.schemas(), adapter_from_flag(args.adapter))
        text = dumps_blueprint(compile(spec))
    except (ACPError, OSError, ValueError) as exc:
        _diag(f"{type(exc).__name__}: {exc}")
        return 1
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_replay(args) -> int:
    try:
        trace = ExecutionTrace.from_json(Path(args.trace).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as exc:
        _diag(str(exc))
        return 1
    sys.stdout.write(emit_trace(trace) if args.events else render_timeline(trace))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acp", description="Run multi-agent execution blueprints.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a blueprint file")
    v.add_argument("blueprint")
    v.add_argument("--fixtures", help="fixtures directory with tools.json / kv tables")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="execute a blueprint")
    r.add_argument("blueprint")
    r.add_argument("--mode", default="fullacp", choices=["fullacp", "noassist", "single"])
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--faults", help="fault plan JSON")
    r.add_argument("--fixtures", help="fixtures directory with tools.json / kv tables")
    r.add_argument("--trace", help="write the event list (JSON) here, plus a .timeline.txt next to it")
    r.add_argument("--report", help="write the run report (JSON) here")
    r.add_argument("--state", help="write the final blueprint and output store (JSON) here")
    r.add_argument("--reroute", help="reroute policy JSON for the fault handler")
    r.add_argument("--timeout", type=float, default=30.0, help="per-node timeout in seconds")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("render", help="fill a deliverable template from a run state")
    d.add_argument("state")
    d.add_argument("template")
    d.add_argument("--out")
    d.set_defaults(func=cmd_render)

    pl = sub.add_parser("plan", help="produce a blueprint through a planning adapter")
    pl.add_argument("goal")
    pl.add_argument("--adapter", default="stub", help="stub | command:<path>")
    pl.add_argument("--fixtures")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plan)

    rp = sub.add_parser("replay", help="render a saved trace as a timeline")
    rp.add_argument("trace")
    rp.add_argument("--events", action="store_true", help="append the event list")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("ACP_LOG", "quiet").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
