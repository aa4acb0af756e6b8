"""Build a registry from a fixtures directory.

A fixtures directory may hold a ``tools.json`` manifest::

    {"tools": [
        {"name": "open-meteo", "kind": "kv", "fixture": "open_meteo.json",
         "validator": "printable",
         "endpoints": [{"id": "forecast", "required": ["latitude", "longitude"],
                        "optional": ["locations"], "outputs": ["forecast"],
                        "key_params": ["latitude", "longitude"]}]},
        {"name": "weather", "kind": "http", "base_url": "http://...",
         "auth": {"header": "X-Api-Key", "env": "ACP_TOOL_WEATHER_KEY", "prefix": ""},
         "endpoints": [...]}
    ]}

Without a manifest, every ``<name>.json`` file becomes a key/value tool
``<name>`` with a single ``lookup(query) -> value`` endpoint. The built-in
``calculator`` and ``concat`` tools are always present.
"""

from __future__ import annotations

import json
from pathlib import Path

from .http import AuthConfig, HttpAdapter
from .mocks import VALIDATORS, CalculatorAdapter, ConcatAdapter, KVAdapter, load_fixture
from .registry import ToolRegistry, ToolSchema

MANIFEST_NAME = "tools.json"


def default_registry(delay: float = 0.0) -> ToolRegistry:
    return ToolRegistry([CalculatorAdapter(delay=delay), ConcatAdapter(delay=delay)])


def load_registry(fixtures: str | Path | None = None) -> ToolRegistry:
    registry = default_registry()
    if fixtures is None:
        return registry
    root = Path(fixtures)
    manifest = root / MANIFEST_NAME
    if not manifest.exists():
        for path in sorted(root.glob("*.json")):
            registry.register(KVAdapter(path.stem, load_fixture(path)))
        return registry
    with open(manifest, encoding="utf-8") as fh:
        spec = json.load(fh)
    for entry in spec.get("tools", []):
        registry.register(adapter_from_entry(entry, root))
    return registry


def adapter_from_entry(entry: dict, root: Path):
    schema = ToolSchema.from_dict(entry)
    validator = VALIDATORS[entry["validator"]] if "validator" in entry else None
    kind = entry.get("kind", "kv")
    if kind == "kv":
        fixture = load_fixture(root / entry["fixture"]) if "fixture" in entry else {}
        key_params = {e["id"]: tuple(e["key_params"]) for e in entry.get("endpoints", []) if "key_params" in e}
        adapter = KVAdapter(schema.name, fixture, schema.endpoints, key_params,
                            schema.description, delay=float(entry.get("delay", 0.0)))
        adapter.schema = schema
    elif kind == "http":
        auth = AuthConfig(**entry["auth"]) if "auth" in entry else None
        adapter = HttpAdapter(schema, entry["base_url"], auth)
    else:
        raise ValueError(f"tool {schema.name!r}: unknown kind {kind!r}")
    if validator is not None:
        adapter.validator = validator
    return adapter
