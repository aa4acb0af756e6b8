"""Deterministic built-in tools used for offline runs and tests."""

from __future__ import annotations

import json
import re
import time
import unicodedata
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from ..errors import ExpressionError
from .registry import CallContext, Endpoint, ToolAdapter, ToolSchema

# -- validators ---------------------------------------------------------------


def nonempty(payload: str) -> bool:
    return bool(payload.strip())


def printable(payload: str) -> bool:
    """Reject payloads with control characters or U+FFFD (typical of garbled bytes)."""
    if not payload.strip():
        return False
    for ch in payload:
        if ch in "\n\r\t":
            continue
        if ch == "\ufffd" or unicodedata.category(ch) in ("Cc", "Cs", "Co"):
            return False
    return True


_NUMBER = re.compile(r"-?\d+(\.\d+)?(/\d+)?")


def is_number(payload: str) -> bool:
    return bool(_NUMBER.fullmatch(payload.strip()))


VALIDATORS = {"nonempty": nonempty, "printable": printable, "number": is_number}


# -- calculator -----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*|\.\d+)|(.))")


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        num, op = m.groups()
        if num is not None:
            tokens.append(num)
        elif op in "+-*/()":
            tokens.append(op)
        else:
            raise ExpressionError(f"unexpected character {op!r} at {m.start(2)}")
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expr(self) -> Fraction:
        value = self.term()
        while self.peek() in ("+", "-"):
            if self.take() == "+":
                value += self.term()
            else:
                value -= self.term()
        return value

    def term(self) -> Fraction:
        value = self.unary()
        while self.peek() in ("*", "/"):
            op = self.take()
            rhs = self.unary()
            if op == "*":
                value *= rhs
            elif rhs == 0:
                raise ExpressionError("division by zero")
            else:
                value /= rhs
        return value

    def unary(self) -> Fraction:
        if self.peek() == "-":
            self.take()
            return -self.unary()
        if self.peek() == "+":
            self.take()
            return self.unary()
        return self.atom()

    def atom(self) -> Fraction:
        tok = self.take()
        if tok is None:
            raise ExpressionError("unexpected end of expression")
        if tok == "(":
            value = self.expr()
            if self.take() != ")":
                raise ExpressionError("missing closing parenthesis")
            return value
        if tok in "+-*/)":
            raise ExpressionError(f"unexpected {tok!r}")
        return Fraction(tok)


def render_fraction(value: Fraction) -> str:
    """Exact canonical text: integers plainly, terminating decimals without
    trailing zeros, everything else as ``p/q``."""
    if value.denominator == 1:
        return str(value.numerator)
    d = value.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{value.numerator}/{value.denominator}"
    k = max(twos, fives)
    scaled = abs(value.numerator) * 10**k // value.denominator
    digits = str(scaled).rjust(k + 1, "0")
    text = f"{digits[:-k]}.{digits[-k:]}".rstrip("0")
    return ("-" if value < 0 else "") + text


def evaluate(expression: str) -> Fraction:
    tokens = _tokenize(expression)
    if not tokens:
        raise ExpressionError("empty expression")
    parser = _Parser(tokens)
    value = parser.expr()
    if parser.peek() is not None:
        raise ExpressionError(f"unexpected {parser.peek()!r}")
    return value


def mock_calculator(query: str) -> str:
    """Evaluate ``+ - * /`` and parentheses over decimals exactly."""
    return render_fraction(evaluate(query))


CALCULATOR_SCHEMA = ToolSchema(
    "calculator",
    (Endpoint("evaluate", required=("query",), outputs=("result",)),),
    description="Exact arithmetic over decimals.",
)


class CalculatorAdapter(ToolAdapter):
    validator = staticmethod(is_number)

    def __init__(self, delay: float = 0.0, name: str = "calculator"):
        self.schema = CALCULATOR_SCHEMA if name == "calculator" else ToolSchema(
            name, CALCULATOR_SCHEMA.endpoints, CALCULATOR_SCHEMA.description)
        self.delay = delay

    def invoke(self, request, ctx: CallContext) -> str:
        if self.delay:
            time.sleep(self.delay)
        return mock_calculator(request.body_dict()["query"])


CONCAT_SCHEMA = ToolSchema(
    "concat",
    (Endpoint("join", required=("left", "right"), optional=("sep",), outputs=("text",)),),
    description="Join two text values.",
)


class ConcatAdapter(ToolAdapter):
    validator = staticmethod(printable)

    def __init__(self, delay: float = 0.0):
        self.schema = CONCAT_SCHEMA
        self.delay = delay

    def invoke(self, request, ctx):
        if self.delay:
            time.sleep(self.delay)
        body = request.body_dict()
        return body["left"] + body.get("sep", " ") + body["right"]


# -- key/value lookup -----------------------------------------------------------------

def load_fixture(path: str | Path) -> dict[str, str]:
    """Read a JSON object of key -> value. Non-string values are stored as canonical JSON text."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: fixture must be a JSON object")
    return {k: v if isinstance(v, str) else json.dumps(v, sort_keys=True) for k, v in data.items()}


def mock_kv(query: str, fixture: Mapping[str, str]) -> str:
    return fixture.get(query, "")


class KVAdapter(ToolAdapter):
    """Looks up the request's key parameters in a fixture table.

    The key is the values of ``key_params`` (per endpoint; default its
    required params) joined with ``", "``. Unknown keys give an empty payload.
    """

    validator = staticmethod(printable)

    def __init__(self, name: str, fixture: Mapping[str, str], endpoints=None,
                 key_params: Mapping[str, tuple[str, ...]] | None = None,
                 description: str = "", delay: float = 0.0):
        if endpoints is None:
            endpoints = (Endpoint("lookup", required=("query",), outputs=("value",)),)
        self.schema = ToolSchema(name, tuple(endpoints), description)
        self.fixture = dict(fixture)
        self.key_params = dict(key_params or {})
        self.delay = delay

    def invoke(self, request, ctx):
        if self.delay:
            time.sleep(self.delay)
        ep = self.schema.endpoint(request.endpoint)
        keys = self.key_params.get(request.endpoint) or (ep.required if ep else ("query",))
        body = request.body_dict()
        return mock_kv(", ".join(body.get(k, "") for k in keys), self.fixture)
