import json
import threading
import time
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from acp_runtime import AgentRequest, BlueprintNode, ParamBinding, StatusCode, build
from acp_runtime.errors import DuplicateTool, ExpressionError, InjectedFault, UnregisteredTool
from acp_runtime.executor import execute_node, invoke_tool
from acp_runtime.tools import (
    AuthConfig,
    CalculatorAdapter,
    CallContext,
    Endpoint,
    FaultBehavior,
    FaultEntry,
    FaultPlan,
    FunctionAdapter,
    KVAdapter,
    ToolRegistry,
    ToolSchema,
    default_registry,
    http_adapter,
    inject,
    load_fixture,
    load_registry,
    mock_calculator,
    mock_kv,
)
from acp_runtime.tools.mocks import evaluate, is_number, printable, render_fraction
from acp_runtime.tools.stub_server import serve_stub
from helpers import fresh_rng, mix_adapter, random_expression, shunting_yard

CTX = CallContext("n", "calculator")


# -- registry ---------------------------------------------------------------------


def test_register_and_lookup():
    reg = ToolRegistry()
    calc = CalculatorAdapter()
    reg.register(calc)
    assert reg.lookup("calculator") is calc
    assert "calculator" in reg


def test_register_twice():
    reg = ToolRegistry([CalculatorAdapter()])
    with pytest.raises(DuplicateTool):
        reg.register(CalculatorAdapter())


def test_lookup_unknown_names_the_tool():
    with pytest.raises(UnregisteredTool) as info:
        ToolRegistry().lookup("weather-oracle")
    assert "weather-oracle" in str(info.value)


def test_schema_rejects_overlapping_params():
    with pytest.raises(ValueError):
        Endpoint("e", required=("a",), optional=("a",))


def test_schema_rejects_duplicate_endpoints():
    with pytest.raises(ValueError):
        ToolSchema("t", (Endpoint("e"), Endpoint("e")))


def test_schema_dict_round_trip():
    from acp_runtime.planner import bundled
    for name in ("tripadvisor.json", "open_meteo.json"):
        d = json.loads(bundled("schemas/" + name).read_text())
        schema = ToolSchema.from_dict(d)
        assert ToolSchema.from_dict(schema.to_dict()) == schema


def test_single_flight_serializes_calls():
    active, peak = [0], [0]
    lock = threading.Lock()

    def fn(body):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.02)
        with lock:
            active[0] -= 1
        return "ok"

    schema = ToolSchema("solo", (Endpoint("e"),), single_flight=True)
    reg = ToolRegistry([FunctionAdapter(schema, fn)])
    adapter = reg.lookup("solo")
    threads = [threading.Thread(target=adapter.invoke, args=(AgentRequest("GET", "e"), CTX)) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] == 1


# -- calculator -------------------------------------------------------------------


@pytest.mark.parametrize("expr,out", [("2+3", "5"), ("(1/4)*8", "2"), ("1/4", "0.25"),
                                      ("1/3", "1/3"), ("-2.50*2", "-5"), ("0.1+0.2", "0.3")])
def test_calculator_examples(expr, out):
    assert mock_calculator(expr) == out


def test_calculator_matches_shunting_yard():
    rng = fresh_rng(200)
    checked = 0
    while checked < 200:
        expr = random_expression(rng)
        try:
            expected = shunting_yard(expr)
        except ZeroDivisionError:
            with pytest.raises(ExpressionError):
                evaluate(expr)
            continue
        assert evaluate(expr) == expected, expr
        assert mock_calculator(expr) == render_fraction(expected)
        checked += 1


@given(st.fractions(max_denominator=10**6))
def test_render_is_exact(value):
    text = render_fraction(value)
    if "/" in text:
        p, q = text.split("/")
        assert Fraction(int(p), int(q)) == value
    else:
        assert Fraction(text) == value
        assert not ("." in text and text.endswith("0"))


@pytest.mark.parametrize("bad", ["", "2+", "(1", "2 3", "x", "1/0", "1..2"])
def test_calculator_parse_errors(bad):
    with pytest.raises(ExpressionError):
        mock_calculator(bad)


def test_calculator_error_surfaces_as_604():
    node = BlueprintNode("a", "t", "calculator", "FUNCTION", "evaluate",
                         (ParamBinding.literal("query", "2+"),), ("result",))
    bp = build("g", [node], [])
    outcome = execute_node(bp, "a", default_registry())
    assert outcome.message.error == StatusCode.TOOL_CALL_FAILURE
    assert "ExpressionError" in outcome.message.description


def test_calculator_adapter_payload():
    payload = CalculatorAdapter().invoke(AgentRequest("FUNCTION", "evaluate", body=(("query", "2+3"),)), CTX)
    assert payload == "5"


# -- validators ---------------------------------------------------------------------


def test_validators():
    assert is_number("5") and is_number("-0.25") and is_number("1/3")
    assert not is_number("five")
    assert printable("hello\nworld")
    assert not printable("�abc")
    assert not printable("a\x00b")


# -- kv ---------------------------------------------------------------------------


def test_kv_lookup():
    fixture = {"Santorini, Greece": "36.39, 25.46"}
    assert mock_kv("Santorini, Greece", fixture) == "36.39, 25.46"
    assert mock_kv("Atlantis", fixture) == ""


def test_fixture_round_trip(tmp_path):
    rng = fresh_rng(5)
    table = {f"key {i} ☀": "".join(chr(rng.randint(32, 0x24F)) for _ in range(rng.randint(0, 40)))
             for i in range(30)}
    table["multi"] = "line one\nline two\n"
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps(table, ensure_ascii=False), encoding="utf-8")
    loaded = load_fixture(path)
    adapter = KVAdapter("kv", loaded)
    ep = adapter.schema.endpoints[0]
    for k, v in table.items():
        assert mock_kv(k, loaded) == v
        body = ((ep.required[0], k),)
        assert adapter.invoke(AgentRequest("GET", ep.id, body=body), CTX) == v


def test_fixture_non_string_values_become_json(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"k": {"b": 1, "a": [1, 2]}}))
    assert load_fixture(path) == {"k": '{"a": [1, 2], "b": 1}'}


def test_manifest_registry_from_bundled_fixtures():
    from acp_runtime.planner import bundled
    reg = load_registry(bundled("vacation"))
    assert {"perplexity", "open-meteo"} <= set(reg)


# -- fault injection ---------------------------------------------------------------------


def test_empty_plan_is_transparent():
    rng = fresh_rng(100)
    bare = mix_adapter()
    wrapped = inject(FaultPlan(), mix_adapter())
    for i in range(100):
        body = tuple((f"p{k}", str(rng.randint(0, 999))) for k in range(rng.randint(1, 5)))
        req = AgentRequest("FUNCTION", "join", body=body)
        ctx = CallContext(f"n{i}", "mix", rng.randint(1, 3))
        assert wrapped.invoke(req, ctx) == bare.invoke(req, ctx)
        assert wrapped.request_fault(ctx) is None
    assert wrapped.schema == bare.schema and wrapped.validator is bare.validator


def test_plan_targets_node_before_tool():
    plan = FaultPlan((FaultEntry("calculator", 1, "Throw"), FaultEntry("a", 1, "EmptyPayload")))
    assert plan.lookup("a", "calculator", 1).behavior is FaultBehavior.EMPTY_PAYLOAD
    assert plan.lookup("b", "calculator", 1).behavior is FaultBehavior.THROW
    assert plan.lookup("b", "calculator", 2) is None


def test_plan_validation():
    with pytest.raises(ValueError):
        FaultEntry("a", 0, "Throw")
    with pytest.raises(ValueError):
        FaultEntry("a", 1, "DropField")


def test_plan_dict_round_trip():
    plan = FaultPlan.random([f"n{i}" for i in range(30)], 0.5, seed=9,
                            behaviors=list(FaultBehavior), field="result")
    assert plan.entries
    assert FaultPlan.from_dict(json.loads(json.dumps(plan.to_dict()))) == plan


def test_random_plan_is_seeded():
    targets = [f"n{i}" for i in range(50)]
    assert FaultPlan.random(targets, 0.3, 1) == FaultPlan.random(targets, 0.3, 1)
    assert FaultPlan.random(targets, 0.0, 1).entries == ()
    assert len(FaultPlan.random(targets, 1.0, 1).entries) == 50


def test_throw_on_first_attempt_only():
    wrapped = inject(FaultPlan((FaultEntry("a", 1, "Throw"),)), CalculatorAdapter())
    req = AgentRequest("FUNCTION", "evaluate", body=(("query", "2+3"),))
    with pytest.raises(InjectedFault):
        wrapped.invoke(req, CallContext("a", "calculator", 1))
    assert wrapped.invoke(req, CallContext("a", "calculator", 2)) == "5"


def test_drop_field_for_future_consumer_is_606():
    schema = ToolSchema("geo", (Endpoint("lookup", required=("place",), outputs=("latitude", "longitude")),))
    adapter = FunctionAdapter(schema, lambda body: json.dumps({"latitude": "36.39", "longitude": "25.46",
                                                               "place": body["place"]}))
    weather_schema = ToolSchema("wx", (Endpoint("forecast", required=("latitude", "longitude")),))
    wx = FunctionAdapter(weather_schema, lambda body: "sunny")
    geo = BlueprintNode("g", "s", "geo", "GET", "lookup", (ParamBinding.literal("place", "Santorini, Greece"),),
                        ("place",))
    fc = BlueprintNode("w", "s", "wx", "GET", "forecast",
                       (ParamBinding.dependency("latitude", "g", "latitude"),
                        ParamBinding.dependency("longitude", "g", "longitude")), ("summary",))
    bp = build("g", [geo, fc], [("g", "w")])
    plan = FaultPlan((FaultEntry("g", 1, "DropField", "latitude"),))
    reg = ToolRegistry([inject(plan, adapter), wx])
    outcome = execute_node(bp, "g", reg)
    assert outcome.message.error == StatusCode.DEPENDENCY_INCOMPLETE_INFORMATION
    assert "latitude" in outcome.message.description
    # the second attempt is unaffected and carries the dependent inputs
    ok = execute_node(bp, "g", reg, attempt=2)
    assert ok.message.status == StatusCode.OK
    assert {(d.target_node, d.name) for d in ok.message.dependent_inputs} == {("w", "latitude"), ("w", "longitude")}


# -- http ---------------------------------------------------------------------------


HTTP_SCHEMA = ToolSchema("stub", (
    Endpoint("echo", optional=("query", "n")),
    Endpoint("status/500", optional=("query",)),
    Endpoint("delay/400", optional=("query",)),
    Endpoint("headers"),
))


@pytest.fixture(scope="module")
def stub_url():
    with serve_stub() as url:
        yield url


def _http_node(endpoint, method="POST"):
    node = BlueprintNode("h", "s", "stub", method, endpoint, (ParamBinding.literal("query", "ping ☀"),))
    return node, build("g", [node], [])


def test_http_echo_post(stub_url):
    adapter = http_adapter(HTTP_SCHEMA, stub_url)
    req = AgentRequest("POST", "echo", body=(("query", "ping ☀"), ("n", "1")))
    assert json.loads(adapter.invoke(req, CTX)) == {"query": "ping ☀", "n": "1"}


def test_http_echo_get(stub_url):
    adapter = http_adapter(HTTP_SCHEMA, stub_url)
    req = AgentRequest("GET", "echo", body=(("query", "a b"),))
    assert json.loads(adapter.invoke(req, CTX)) == {"query": "a b"}


def test_http_500_is_604(stub_url):
    node, bp = _http_node("status/500")
    reg = ToolRegistry([http_adapter(HTTP_SCHEMA, stub_url)])
    outcome = execute_node(bp, "h", reg, timeout=5)
    assert outcome.message.error == StatusCode.TOOL_CALL_FAILURE
    assert "HTTP 500" in outcome.message.description


def test_http_timeout_is_604(stub_url):
    node, bp = _http_node("delay/400")
    adapter = http_adapter(HTTP_SCHEMA, stub_url)
    req = AgentRequest("POST", "delay/400", body=(("query", "x"),))
    result = invoke_tool(req, adapter, 0.1, bp, node)
    assert result.error == StatusCode.TOOL_CALL_FAILURE
    # whichever fires first, the executor's watchdog or the socket timeout
    assert "timeout after 0.1s" in result.description


def test_http_transport_error_is_604():
    node, bp = _http_node("echo")
    reg = ToolRegistry([http_adapter(HTTP_SCHEMA, "http://127.0.0.1:9")])
    outcome = execute_node(bp, "h", reg, timeout=5)
    assert outcome.message.error == StatusCode.TOOL_CALL_FAILURE


def test_http_auth_from_env(stub_url, monkeypatch):
    monkeypatch.setenv("ACP_TOOL_STUB_KEY", "s3cret")
    adapter = http_adapter(HTTP_SCHEMA, stub_url, AuthConfig(header="X-Api-Key", prefix=""))
    seen = json.loads(adapter.invoke(AgentRequest("GET", "headers"), CTX))
    assert seen.get("X-Api-Key") == "s3cret"


def test_http_rejects_bad_base_url():
    with pytest.raises(ValueError):
        http_adapter(HTTP_SCHEMA, "not a url")


def test_unregistered_tool_at_preflight():
    from acp_runtime import run
    node = BlueprintNode("a", "t", "weather-oracle", "GET", "x")
    with pytest.raises(UnregisteredTool) as info:
        run(build("g", [node], []), default_registry())
    assert info.value.name == "weather-oracle"
