"""Tool schemas, the adapter interface and the registry."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping

from ..errors import DuplicateTool, SchemaViolation, UnregisteredTool
from ..protocol import AgentRequest

Validator = Callable[[str], bool]


@dataclass(frozen=True)
class Endpoint:
    id: str
    required: tuple[str, ...] = ()
    optional: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    formats: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("required", "optional", "outputs"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        overlap = set(self.required) & set(self.optional)
        if overlap:
            raise SchemaViolation(f"{self.id}.optional", f"also required: {sorted(overlap)}")

    @property
    def params(self) -> tuple[str, ...]:
        return self.required + self.optional


@dataclass(frozen=True)
class ToolSchema:
    name: str
    endpoints: tuple[Endpoint, ...]
    description: str = ""
    single_flight: bool = False

    def __post_init__(self):
        object.__setattr__(self, "endpoints", tuple(self.endpoints))
        ids = [e.id for e in self.endpoints]
        if len(set(ids)) != len(ids):
            raise SchemaViolation(f"{self.name}.endpoints", "duplicate endpoint id")

    def endpoint(self, endpoint_id: str) -> Endpoint | None:
        for e in self.endpoints:
            if e.id == endpoint_id:
                return e
        return None

    @classmethod
    def from_dict(cls, d: Mapping) -> "ToolSchema":
        return cls(
            name=d["name"],
            endpoints=tuple(
                Endpoint(
                    id=e["id"],
                    required=tuple(e.get("required", ())),
                    optional=tuple(e.get("optional", ())),
                    outputs=tuple(e.get("outputs", ())),
                    formats=dict(e.get("formats", {})),
                )
                for e in d.get("endpoints", ())
            ),
            description=d.get("description", ""),
            single_flight=bool(d.get("single_flight", False)),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "single_flight": self.single_flight,
            "endpoints": [
                {"id": e.id, "required": list(e.required), "optional": list(e.optional),
                 "outputs": list(e.outputs), "formats": dict(e.formats)}
                for e in self.endpoints
            ],
        }


@dataclass(frozen=True)
class CallContext:
    """Who is calling: passed to adapters alongside the request."""

    node_id: str
    tool: str
    attempt: int = 1
    timeout: float | None = None
    seed: int = 0


class ToolAdapter:
    """Base class for tools. Subclasses implement :meth:`invoke` and return raw text.

    ``validator`` is the relevance predicate applied to raw payloads; None
    means the default non-empty check.
    """

    schema: ToolSchema
    validator: Validator | None = None

    @property
    def name(self) -> str:
        return self.schema.name

    def invoke(self, request: AgentRequest, ctx: CallContext) -> str:
        raise NotImplementedError


class FunctionAdapter(ToolAdapter):
    """Adapter around a plain function of the request body."""

    def __init__(self, schema: ToolSchema, fn: Callable[[dict[str, str]], str],
                 validator: Validator | None = None):
        self.schema = schema
        self.fn = fn
        self.validator = validator

    def invoke(self, request, ctx):
        return self.fn(request.body_dict())


class _SingleFlight(ToolAdapter):
    def __init__(self, inner: ToolAdapter):
        self.inner = inner
        self.schema = inner.schema
        self.validator = inner.validator
        self._lock = threading.Lock()

    def __getattr__(self, item):
        return getattr(self.inner, item)

    def invoke(self, request, ctx):
        with self._lock:
            return self.inner.invoke(request, ctx)


class ToolRegistry:
    def __init__(self, adapters: Iterable[ToolAdapter] = ()):
        self._adapters: dict[str, ToolAdapter] = {}
        for a in adapters:
            self.register(a)

    def register(self, adapter: ToolAdapter) -> None:
        name = adapter.schema.name
        if name in self._adapters:
            raise DuplicateTool(f"tool already registered: {name}")
        if adapter.schema.single_flight and not isinstance(adapter, _SingleFlight):
            adapter = _SingleFlight(adapter)
        self._adapters[name] = adapter

    def lookup(self, name: str) -> ToolAdapter:
        try:
            return self._adapters[name]
        except KeyError:
            raise UnregisteredTool(name) from None

    get = lookup

    def __contains__(self, name) -> bool:
        return name in self._adapters

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._adapters))

    def __len__(self):
        return len(self._adapters)

    def schemas(self) -> list[ToolSchema]:
        return [self._adapters[n].schema for n in self]

    def map(self, fn: Callable[[ToolAdapter], ToolAdapter]) -> "ToolRegistry":
        """New registry with every adapter passed through ``fn`` (e.g. fault injection)."""
        return ToolRegistry(fn(self._adapters[n]) for n in self)
