"""Blueprint sources: JSON blueprint files, compact task specs, and a planning-adapter slot."""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable

from .blueprint import (
    BlueprintNode,
    ExecutionBlueprint,
    binding_from_dict,
    blueprint_from_dict,
    blueprint_to_dict,
    build,
)
from .errors import (
    ACPError,
    AdapterUnavailable,
    BlueprintFileError,
    InvalidPlan,
    SchemaViolation,
    UnknownDependencyVariable,
    UnknownStep,
)
from .protocol import ParamBinding
from .tools.registry import ToolSchema

# -- blueprint files --------------------------------------------------------------


def loads_blueprint(text: str, source: str = "<string>") -> ExecutionBlueprint:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BlueprintFileError(f"{source}: {exc.msg}", line=exc.lineno, field=f"column {exc.colno}") from None
    try:
        return blueprint_from_dict(data)
    except SchemaViolation as exc:
        raise BlueprintFileError(f"{source}: {exc.reason}", line=_line_of(text, exc.path), field=exc.path) from None


def load_blueprint(path: str | Path) -> ExecutionBlueprint:
    """Parse and validate a blueprint file. Build errors (cycles, dangling edges) pass through."""
    path = Path(path)
    return loads_blueprint(path.read_text(encoding="utf-8"), str(path))


def dumps_blueprint(bp: ExecutionBlueprint) -> str:
    return json.dumps(blueprint_to_dict(bp), indent=2, ensure_ascii=False) + "\n"


def _line_of(text: str, path: str) -> int | None:
    """Best-effort line number for the last named key in a field path."""
    key = path.split(".")[-1].split("[")[0]
    if not key:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def bundled(name: str) -> Path:
    """Path to a data file shipped with the package (example blueprints, fixtures)."""
    return Path(str(resources.files("acp_runtime") / "data" / name))


# -- task specs -------------------------------------------------------------------


@dataclass(frozen=True)
class StepTemplate:
    tool: str
    endpoint: str
    method: str = "FUNCTION"
    params: tuple[ParamBinding, ...] = ()
    expected_outputs: tuple[str, ...] = ()


@dataclass(frozen=True)
class Dependency:
    producer: str
    consumer: str
    variable: str
    param: str | None = None  # consumer parameter name; defaults to the variable


@dataclass(frozen=True)
class Subtask:
    id: str
    steps: tuple[StepTemplate, ...]
    agent: str | None = None


@dataclass(frozen=True)
class TaskSpec:
    goal: str
    subtasks: tuple[Subtask, ...]
    dependencies: tuple[Dependency, ...] = ()

    def step_ids(self) -> dict[str, tuple[Subtask, StepTemplate]]:
        return {f"{s.id}.{k}": (s, step) for s in self.subtasks for k, step in enumerate(s.steps, 1)}

    def tools(self) -> set[str]:
        return {step.tool for s in self.subtasks for step in s.steps}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TaskSpec":
        if not isinstance(d, dict):
            raise SchemaViolation("", "task spec must be a JSON object")
        subtasks = []
        for i, s in enumerate(d.get("subtasks", [])):
            steps = []
            for k, st in enumerate(s.get("steps", [])):
                path = f"subtasks[{i}].steps[{k}]"
                try:
                    steps.append(StepTemplate(
                        tool=st["tool"], endpoint=st["endpoint"], method=st.get("method", "FUNCTION"),
                        params=tuple(binding_from_dict(p, f"{path}.params[{j}]")
                                     for j, p in enumerate(st.get("params", []))),
                        expected_outputs=tuple(st.get("expected_outputs", [])),
                    ))
                except KeyError as exc:
                    raise SchemaViolation(f"{path}.{exc.args[0]}", "missing field") from None
            if "id" not in s:
                raise SchemaViolation(f"subtasks[{i}].id", "missing field")
            subtasks.append(Subtask(s["id"], tuple(steps), s.get("agent")))
        deps = []
        for i, dep in enumerate(d.get("dependencies", [])):
            try:
                deps.append(Dependency(dep["producer"], dep["consumer"], dep["variable"], dep.get("param")))
            except KeyError as exc:
                raise SchemaViolation(f"dependencies[{i}].{exc.args[0]}", "missing field") from None
        if "goal" not in d:
            raise SchemaViolation("goal", "missing field")
        return cls(d["goal"], tuple(subtasks), tuple(deps))

    @classmethod
    def load(cls, path: str | Path) -> "TaskSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def compile(spec: TaskSpec) -> ExecutionBlueprint:  # noqa: A001 - mirrors the operation name
    """One node per step (ids ``<subtask>.<k>``), steps chained within a subtask,
    plus one edge and one dependency binding per declared dependency."""
    steps = spec.step_ids()
    extra: dict[str, list[ParamBinding]] = {sid: [] for sid in steps}
    edges: set[tuple[str, str]] = set()
    for s in spec.subtasks:
        for k in range(1, len(s.steps)):
            edges.add((f"{s.id}.{k}", f"{s.id}.{k + 1}"))
    for dep in spec.dependencies:
        for end in (dep.producer, dep.consumer):
            if end not in steps:
                raise UnknownStep(f"dependency references unknown step {end!r}")
        if dep.variable not in steps[dep.producer][1].expected_outputs:
            raise UnknownDependencyVariable(
                f"{dep.producer} does not declare output {dep.variable!r} (needed by {dep.consumer})")
        edges.add((dep.producer, dep.consumer))
        extra[dep.consumer].append(ParamBinding.dependency(dep.param or dep.variable, dep.producer, dep.variable))
    nodes = [
        BlueprintNode(
            id=sid, subtask=sub.id, tool=step.tool, method=step.method, endpoint=step.endpoint,
            params=step.params + tuple(extra[sid]), expected_outputs=step.expected_outputs, agent=sub.agent,
        )
        for sid, (sub, step) in steps.items()
    ]
    return build(spec.goal, nodes, edges)


# -- planning adapters ----------------------------------------------------------------

PlanAdapter = Callable[[str, list[dict]], str]


def _catalog_names(catalog: Iterable[ToolSchema | str]) -> list[str]:
    return sorted(c if isinstance(c, str) else c.name for c in catalog)


def plan_via_adapter(goal: str, catalog: Iterable[ToolSchema | str],
                     adapter: PlanAdapter | None) -> TaskSpec:
    """Ask ``adapter`` for a task spec and validate it strictly.

    The adapter receives the goal and the catalog (as dicts) and returns JSON
    text. Anything that does not parse, references tools outside the catalog,
    or fails to compile is rejected with diagnostics; nothing is repaired.
    """
    if adapter is None:
        raise AdapterUnavailable("no planning adapter configured")
    catalog = list(catalog)
    names = _catalog_names(catalog)
    described = [c.to_dict() if isinstance(c, ToolSchema) else {"name": c} for c in catalog]
    try:
        text = adapter(goal, described)
    except AdapterUnavailable:
        raise
    except Exception as exc:
        raise AdapterUnavailable(f"planning adapter failed: {exc}") from exc
    try:
        spec = TaskSpec.from_dict(json.loads(text))
    except (json.JSONDecodeError, TypeError) as exc:
        raise InvalidPlan([f"adapter output is not JSON: {exc}"]) from None
    except SchemaViolation as exc:
        raise InvalidPlan([str(exc)]) from None
    diagnostics = [f"unknown tool {t!r} (not in catalog)" for t in sorted(spec.tools() - set(names))]
    if diagnostics:
        raise InvalidPlan(diagnostics)
    try:
        compile(spec)
    except ACPError as exc:
        raise InvalidPlan([f"{type(exc).__name__}: {exc}"]) from None
    return spec


def stub_adapter(path: str | Path | None = None) -> PlanAdapter:
    """Adapter that ignores the goal and returns a fixed task spec file (default: bundled travel plan)."""
    source = Path(path) if path else bundled("travel_taskspec.json")

    def adapter(goal: str, catalog: list[dict]) -> str:
        return source.read_text(encoding="utf-8")

    return adapter


def command_adapter(command: str, timeout: float = 60.0) -> PlanAdapter:
    """Adapter that runs ``command <goal>`` with the catalog as JSON on stdin and reads the task spec from stdout."""

    def adapter(goal: str, catalog: list[dict]) -> str:
        try:
            proc = subprocess.run(shlex.split(command) + [goal], input=json.dumps(catalog),
                                  capture_output=True, text=True, timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise AdapterUnavailable(f"cannot run {command!r}: {exc}") from None
        if proc.returncode != 0:
            raise AdapterUnavailable(f"{command!r} exited {proc.returncode}: {proc.stderr.strip()}")
        return proc.stdout

    return adapter


def adapter_from_flag(flag: str) -> PlanAdapter:
    if flag == "stub":
        return stub_adapter()
    if flag.startswith("command:"):
        return command_adapter(flag[len("command:"):])
    raise ValueError(f"unknown adapter {flag!r}; expected 'stub' or 'command:<path>'")
