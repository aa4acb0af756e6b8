"""Exception hierarchy for the runtime."""


class ACPError(Exception):
    """Base class for every error raised by acp_runtime."""


# -- protocol ---------------------------------------------------------------

class ProtocolError(ACPError):
    pass


class MalformedMessage(ProtocolError):
    """Text could not be parsed as a message at all."""


class SchemaViolation(ProtocolError, ValueError):
    """A message parsed but broke a field-level invariant."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.reason = message


# -- blueprint --------------------------------------------------------------

class BlueprintError(ACPError):
    pass


class CycleDetected(BlueprintError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle))


class DanglingEdge(BlueprintError):
    pass


class DanglingDependencyBinding(BlueprintError):
    pass


class DuplicateNode(BlueprintError):
    pass


class UnknownNode(BlueprintError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown node"


class NodeNotRunning(BlueprintError):
    pass


class InvalidTransition(BlueprintError):
    pass


class RetryBudgetExhausted(BlueprintError):
    pass


class RerouteCreatesCycle(BlueprintError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("reroute would create cycle: " + " -> ".join(self.cycle))


class InputError(BlueprintError):
    """Input preparation failed with a request-stage status code (601/603)."""

    def __init__(self, code, param: str, message: str):
        super().__init__(message)
        self.code = code
        self.param = param


# -- tools ------------------------------------------------------------------

class ToolError(ACPError):
    pass


class DuplicateTool(ToolError):
    pass


class UnregisteredTool(ToolError, KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"tool not registered: {self.name}"


class ParseError(ACPError):
    """Text input could not be parsed. ``line`` and ``field`` locate the problem when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(field)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.field = field


class ExpressionError(ParseError, ToolError):
    pass


class HttpToolError(ToolError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class InjectedFault(ToolError):
    pass


# -- scheduler --------------------------------------------------------------

class Deadlock(ACPError):
    pass


# -- planner ----------------------------------------------------------------

class PlanError(ACPError):
    pass


class UnknownStep(PlanError):
    pass


class UnknownDependencyVariable(PlanError):
    pass


class AdapterUnavailable(PlanError):
    pass


class InvalidPlan(PlanError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid plan: " + "; ".join(self.diagnostics))


class BlueprintFileError(ParseError):
    pass


# -- coordinator ------------------------------------------------------------

class TemplateSlotUnknownNode(ACPError):
    def __init__(self, slot: str, node_id: str):
        super().__init__(f"template slot {{{{{slot}}}}} names unknown node {node_id!r}")
        self.slot = slot
        self.node_id = node_id
