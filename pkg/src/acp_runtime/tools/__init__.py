from .faults import FaultBehavior, FaultEntry, FaultInjectingAdapter, FaultPlan, inject
from .http import AuthConfig, HttpAdapter, http_adapter
from .manifest import default_registry, load_registry
from .mocks import (
    CALCULATOR_SCHEMA,
    CONCAT_SCHEMA,
    VALIDATORS,
    CalculatorAdapter,
    ConcatAdapter,
    KVAdapter,
    load_fixture,
    mock_calculator,
    mock_kv,
)
from .registry import (
    CallContext,
    Endpoint,
    FunctionAdapter,
    ToolAdapter,
    ToolRegistry,
    ToolSchema,
)

__all__ = [
    "AuthConfig", "CALCULATOR_SCHEMA", "CONCAT_SCHEMA", "CalculatorAdapter", "CallContext",
    "ConcatAdapter", "Endpoint", "FaultBehavior", "FaultEntry", "FaultInjectingAdapter",
    "FaultPlan", "FunctionAdapter", "HttpAdapter", "KVAdapter", "ToolAdapter", "ToolRegistry",
    "ToolSchema", "VALIDATORS", "default_registry", "http_adapter", "inject", "load_fixture",
    "load_registry", "mock_calculator", "mock_kv",
]
