"""Shared generators and independent oracles for the test suite.

The oracles here deliberately use different algorithms from the package:
boolean-matrix closure instead of DFS/BFS, shunting-yard instead of
recursive descent.
"""

import json
import operator
import random
from fractions import Fraction

from acp_runtime import BlueprintNode, ParamBinding, build
from acp_runtime.tools import Endpoint, FunctionAdapter, ToolRegistry, ToolSchema
from acp_runtime.tools.mocks import printable

# -- graph oracles --------------------------------------------------------------


def closure(nodes, edges):
    """Transitive closure by repeated boolean squaring of the adjacency matrix."""
    nodes = sorted(nodes)
    idx = {n: i for i, n in enumerate(nodes)}
    k = len(nodes)
    m = [[False] * k for _ in range(k)]
    for u, v in edges:
        m[idx[u]][idx[v]] = True
    while True:
        sq = [[m[i][j] or any(m[i][x] and m[x][j] for x in range(k)) for j in range(k)] for i in range(k)]
        if sq == m:
            break
        m = sq
    return {nodes[i]: {nodes[j] for j in range(k) if m[i][j]} for i in range(k)}


def has_cycle_oracle(nodes, edges):
    reach = closure(nodes, edges)
    return any(n in reach[n] for n in nodes)


def longest_chain(node, preds, memo=None):
    memo = {} if memo is None else memo
    if node not in memo:
        memo[node] = max((longest_chain(p, preds, memo) + 1 for p in preds.get(node, ())), default=0)
    return memo[node]


def random_digraph(rng, n, p):
    nodes = [f"v{i}" for i in range(n)]
    edges = {(u, v) for u in nodes for v in nodes if rng.random() < p}
    return nodes, sorted(edges)


def random_dag(rng, n, p):
    nodes = [f"n{i:02d}" for i in range(n)]
    edges = [(nodes[i], nodes[j]) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return nodes, edges


# -- the "mix" tool -------------------------------------------------------------------

MIX_PARAMS = tuple(f"p{i}" for i in range(16))
MIX_SCHEMA = ToolSchema("mix", (Endpoint("join", required=("p0",), optional=MIX_PARAMS[1:], outputs=("result",)),))


def _mix(body):
    joined = "+".join(body[k] for k in MIX_PARAMS if k in body)
    return json.dumps({"result": f"r[{joined}]", "aux": f"a[{joined}]"}, sort_keys=True)


def mix_adapter(delay=0.0):
    import time

    def fn(body):
        if delay:
            time.sleep(delay)
        return _mix(body)

    return FunctionAdapter(MIX_SCHEMA, fn, validator=printable)


def mix_registry(delay=0.0):
    return ToolRegistry([mix_adapter(delay)])


def mix_node(node_id, preds, rng=None, aux_prob=0.0, subtask="t"):
    params = [ParamBinding.literal("p0", f"seed-{node_id}")]
    for i, p in enumerate(sorted(preds), 1):
        out = "aux" if rng is not None and rng.random() < aux_prob else "result"
        params.append(ParamBinding.dependency(f"p{i}", p, out))
    return BlueprintNode(node_id, subtask, "mix", "FUNCTION", "join", tuple(params), ("result",))


def random_blueprint(rng, n, p=0.3, aux_prob=0.0):
    nodes, edges = random_dag(rng, n, p)
    preds = {v: [u for u, w in edges if w == v] for v in nodes}
    return build("random", [mix_node(v, preds[v], rng, aux_prob) for v in nodes], edges)


# -- arithmetic oracle ------------------------------------------------------------------

_OPS = {"+": (1, operator.add), "-": (1, operator.sub), "*": (2, operator.mul), "/": (2, operator.truediv)}


def shunting_yard(expr):
    """Evaluate with the shunting-yard algorithm. Prefix minus binds tightest."""
    tokens, i = [], 0
    while i < len(expr):
        c = expr[i]
        if c.isspace():
            i += 1
        elif c.isdigit() or c == ".":
            j = i
            while j < len(expr) and (expr[j].isdigit() or expr[j] == "."):
                j += 1
            tokens.append(Fraction(expr[i:j]))
            i = j
        else:
            tokens.append(c)
            i += 1
    out, stack, prev = [], [], None
    for t in tokens:
        if isinstance(t, Fraction):
            out.append(t)
            prev = "num"
        elif t == "(":
            stack.append(t)
            prev = "("
        elif t == ")":
            while stack[-1] != "(":
                out.append(stack.pop())
            stack.pop()
            prev = ")"
        elif prev in (None, "(", "op"):
            # prefix sign; unary plus is a no-op
            if t == "-":
                stack.append("neg")
            prev = "op"
        else:
            while stack and stack[-1] != "(" and (stack[-1] == "neg" or _OPS[stack[-1]][0] >= _OPS[t][0]):
                out.append(stack.pop())
            stack.append(t)
            prev = "op"
    while stack:
        out.append(stack.pop())
    values = []
    for t in out:
        if isinstance(t, Fraction):
            values.append(t)
        elif t == "neg":
            values.append(-values.pop())
        else:
            b, a = values.pop(), values.pop()
            values.append(_OPS[t][1](a, b))
    assert len(values) == 1
    return values[0]


def random_expression(rng, depth=3):
    if depth == 0 or rng.random() < 0.3:
        whole = rng.randint(0, 99)
        if rng.random() < 0.3:
            return f"{whole}.{rng.randint(0, 99):02d}"
        return str(whole)
    kind = rng.random()
    if kind < 0.1:
        return "-" + random_expression(rng, depth - 1)
    if kind < 0.25:
        return "(" + random_expression(rng, depth - 1) + ")"
    op = rng.choice("+-*/")
    return random_expression(rng, depth - 1) + op + random_expression(rng, depth - 1)


def fresh_rng(seed):
    return random.Random(seed)


# -- trace checks ---------------------------------------------------------------------


def topo_violations(trace, bp):
    """Dispatched events that happen before some predecessor's Succeeded event."""
    from acp_runtime import EventKind

    succeeded_at = {}
    bad = []
    for e in trace:
        if e.kind is EventKind.SUCCEEDED:
            succeeded_at.setdefault(e.node, e.seq)
        elif e.kind is EventKind.DISPATCHED:
            for p in bp.predecessors(e.node):
                if succeeded_at.get(p, float("inf")) > e.seq:
                    bad.append((e.node, p))
    return bad
