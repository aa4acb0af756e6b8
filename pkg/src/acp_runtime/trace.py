"""Execution trace: ordered event log plus a fixed-width timeline rendering."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable


class EventKind(str, Enum):
    DISPATCHED = "Dispatched"
    TOOL_CALLED = "ToolCalled"
    SUCCEEDED = "Succeeded"
    ERROR_RAISED = "ErrorRaised"
    ASSISTANCE_POSTED = "AssistancePosted"
    RESOLUTION_APPLIED = "ResolutionApplied"
    SKIPPED = "Skipped"


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    tick: int
    elapsed: float  # seconds since run start
    node: str
    kind: EventKind
    detail: str = ""
    code: int | None = None
    action: str | None = None

    def to_dict(self, wall: bool = False) -> dict[str, Any]:
        d: dict[str, Any] = {"seq": self.seq, "tick": self.tick, "node": self.node,
                             "kind": self.kind.value, "detail": self.detail}
        if self.code is not None:
            d["code"] = self.code
        if self.action is not None:
            d["action"] = self.action
        if wall:
            d["elapsed_ms"] = round(self.elapsed * 1000, 3)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TraceEvent":
        return cls(d["seq"], d["tick"], d.get("elapsed_ms", 0.0) / 1000, d["node"],
                   EventKind(d["kind"]), d.get("detail", ""), d.get("code"), d.get("action"))


class ExecutionTrace:
    """Thread-safe append-only event log.

    ``tick`` is the scheduler iteration in which an event happened; it is
    the logical clock used for deterministic output. ``elapsed`` is wall
    time and is only exported on request.
    """

    def __init__(self, events: Iterable[TraceEvent] = ()):
        self.events: list[TraceEvent] = list(events)
        self._lock = threading.Lock()
        self._t0 = time.perf_counter()

    def record(self, tick: int, node: str, kind: EventKind, detail: str = "",
               code: int | None = None, action: str | None = None) -> TraceEvent:
        with self._lock:
            ev = TraceEvent(len(self.events), tick, time.perf_counter() - self._t0, node,
                            EventKind(kind), detail, None if code is None else int(code), action)
            self.events.append(ev)
            return ev

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def for_node(self, node: str) -> list[TraceEvent]:
        return [e for e in self.events if e.node == node]

    def of_kind(self, kind: EventKind) -> list[TraceEvent]:
        return [e for e in self.events if e.kind is kind]

    def nodes(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.events:
            seen.setdefault(e.node, None)
        return list(seen)

    def to_list(self, wall: bool = False) -> list[dict[str, Any]]:
        return [e.to_dict(wall) for e in self.events]

    def to_json(self, wall: bool = False) -> str:
        return json.dumps(self.to_list(wall), sort_keys=True, indent=1, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExecutionTrace":
        return cls(TraceEvent.from_dict(d) for d in json.loads(text))


_FINAL_CHAR = {
    EventKind.SUCCEEDED: "S",
    EventKind.SKIPPED: "x",
    EventKind.ERROR_RAISED: "E",
}

LEGEND = "legend: = running  S succeeded  E error  R retried/rerouted  F failed  x skipped"


def _column(e: TraceEvent, clock: str, bucket_ms: float) -> int:
    if clock == "wall":
        return int(e.elapsed * 1000 // bucket_ms)
    return e.tick


def render_timeline(trace: ExecutionTrace, clock: str = "logical", bucket_ms: float = 50.0) -> str:
    """Rows are nodes (first-seen order), columns are ticks or wall-time buckets."""
    if not trace.events:
        return LEGEND + "\n"
    width = max(_column(e, clock, bucket_ms) for e in trace.events) + 1
    names = trace.nodes()
    pad = max(len(n) for n in names)
    header = " " * pad + " |" + "".join(str(i % 10) for i in range(width))
    rows = [header]
    for name in names:
        cells = [" "] * width
        running_from = None
        for e in trace.for_node(name):
            col = _column(e, clock, bucket_ms)
            if e.kind is EventKind.DISPATCHED:
                running_from = col
                cells[col] = "="
            elif e.kind in _FINAL_CHAR:
                if running_from is not None:
                    for c in range(running_from, col):
                        if cells[c] == " ":
                            cells[c] = "="
                running_from = None
                cells[col] = _FINAL_CHAR[e.kind]
            elif e.kind is EventKind.RESOLUTION_APPLIED:
                cells[col] = "F" if e.action == "Abandon" else "R"
        rows.append(name.ljust(pad) + " |" + "".join(cells).rstrip())
    unit = "tick" if clock != "wall" else f"{bucket_ms:g}ms"
    return "\n".join(rows) + f"\n(columns: {unit}) {LEGEND}\n"


def emit_trace(trace: ExecutionTrace, clock: str = "logical", bucket_ms: float = 50.0) -> str:
    """Timeline followed by one canonical JSON event per line.

    With the default logical clock the output contains no wall-clock data,
    so single-worker runs with the same inputs render byte-identically.
    """
    wall = clock == "wall"
    lines = [json.dumps(e.to_dict(wall), sort_keys=True, ensure_ascii=False) for e in trace.events]
    return render_timeline(trace, clock, bucket_ms) + "\n# events\n" + "\n".join(lines) + "\n"
