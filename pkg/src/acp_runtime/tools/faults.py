"""Scripted fault injection for adapters.

A :class:`FaultPlan` maps ``(target, attempt)`` to a forced behavior, where
the target is a node id or a tool name (node ids win). Tool-side behaviors
are applied by the wrapping adapter; request-side behaviors are exposed via
``request_fault`` and applied by the executor while preparing the request.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import InjectedFault, SchemaViolation
from .registry import CallContext, ToolAdapter


class FaultBehavior(str, Enum):
    THROW = "Throw"
    TIMEOUT = "Timeout"
    EMPTY_PAYLOAD = "EmptyPayload"
    DROP_FIELD = "DropField"
    GARBAGE_PAYLOAD = "GarbagePayload"
    MISSING_PARAM = "MissingParam"
    WRONG_STEP = "WrongStep"
    INVALID_PARAM = "InvalidParam"

    @property
    def request_side(self) -> bool:
        return self in REQUEST_BEHAVIORS


REQUEST_BEHAVIORS = frozenset({FaultBehavior.MISSING_PARAM, FaultBehavior.WRONG_STEP,
                               FaultBehavior.INVALID_PARAM})


@dataclass(frozen=True)
class FaultEntry:
    target: str
    attempt: int
    behavior: FaultBehavior
    field: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "behavior", FaultBehavior(self.behavior))
        if self.attempt < 1:
            raise SchemaViolation("attempt", "attempt index starts at 1")
        if self.behavior is FaultBehavior.DROP_FIELD and not self.field:
            raise SchemaViolation("field", "DropField needs a field name")


@dataclass(frozen=True)
class FaultPlan:
    entries: tuple[FaultEntry, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def lookup(self, node_id: str, tool: str, attempt: int) -> FaultEntry | None:
        by_tool = None
        for e in self.entries:
            if e.attempt != attempt:
                continue
            if e.target == node_id:
                return e
            if e.target == tool and by_tool is None:
                by_tool = e
        return by_tool

    def __bool__(self):
        return bool(self.entries)

    @classmethod
    def random(cls, targets: Iterable[str], probability: float, seed: int,
               behaviors: Sequence[FaultBehavior] = (FaultBehavior.THROW,),
               attempt: int = 1, field: str | None = None) -> "FaultPlan":
        """Transient plan: each target independently faults on ``attempt`` with ``probability``."""
        rng = random.Random(seed)
        entries = []
        for t in sorted(targets):
            if rng.random() < probability:
                b = FaultBehavior(rng.choice(list(behaviors)))
                entries.append(FaultEntry(t, attempt, b, field if b is FaultBehavior.DROP_FIELD else None))
        return cls(tuple(entries), seed)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "entries": [
                {"target": e.target, "attempt": e.attempt, "behavior": e.behavior.value,
                 **({"field": e.field} if e.field else {})}
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FaultPlan":
        entries = []
        for i, e in enumerate(d.get("entries", [])):
            try:
                entries.append(FaultEntry(e["target"], int(e.get("attempt", 1)),
                                          FaultBehavior(e["behavior"]), e.get("field")))
            except (KeyError, ValueError) as exc:
                raise SchemaViolation(f"entries[{i}]", str(exc)) from None
        return cls(tuple(entries), int(d.get("seed", 0)))

    @classmethod
    def load(cls, path: str | Path) -> "FaultPlan":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def garbage(seed: int, node_id: str, attempt: int, length: int = 24) -> str:
    rng = random.Random(f"{seed}:{node_id}:{attempt}")
    junk = "".join(chr(rng.randrange(0, 32)) for _ in range(length // 2))
    return "\ufffd" + junk + "".join(rng.choice("0123456789abcdef") for _ in range(length // 2))


def drop_field(payload: str, name: str) -> str:
    """Remove ``name`` from a JSON-object payload; any other payload becomes empty."""
    try:
        data = json.loads(payload)
    except (json.JSONDecodeError, TypeError):
        return ""
    if not isinstance(data, dict):
        return ""
    data.pop(name, None)
    return json.dumps(data, sort_keys=True)


class FaultInjectingAdapter(ToolAdapter):
    def __init__(self, inner: ToolAdapter, plan: FaultPlan):
        self.inner = inner
        self.plan = plan
        self.schema = inner.schema
        self.validator = inner.validator

    def request_fault(self, ctx: CallContext) -> FaultEntry | None:
        entry = self.plan.lookup(ctx.node_id, ctx.tool, ctx.attempt)
        if entry is not None and entry.behavior.request_side:
            return entry
        return None

    def invoke(self, request, ctx: CallContext) -> str:
        entry = self.plan.lookup(ctx.node_id, ctx.tool, ctx.attempt)
        if entry is None or entry.behavior.request_side:
            return self.inner.invoke(request, ctx)
        b = entry.behavior
        if b is FaultBehavior.THROW:
            raise InjectedFault(f"injected failure ({ctx.node_id}, attempt {ctx.attempt})")
        if b is FaultBehavior.TIMEOUT:
            time.sleep((ctx.timeout if ctx.timeout is not None else 1.0) + 0.05)
            return ""
        if b is FaultBehavior.EMPTY_PAYLOAD:
            return ""
        if b is FaultBehavior.DROP_FIELD:
            return drop_field(self.inner.invoke(request, ctx), entry.field)
        return garbage(self.plan.seed, ctx.node_id, ctx.attempt)


def inject(plan: FaultPlan, adapter: ToolAdapter) -> ToolAdapter:
    """Wrap ``adapter`` so it consults ``plan`` before delegating."""
    return FaultInjectingAdapter(adapter, plan)
