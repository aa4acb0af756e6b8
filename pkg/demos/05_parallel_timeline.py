"""Two independent chains finish in about half the time with two workers.

Every calculator call sleeps 50ms so the overlap is visible in both the
wall-clock report and the rendered timeline.
"""

from acp_runtime import BlueprintNode, ExecutionPolicy, ParamBinding, build, run
from acp_runtime.tools import default_registry
from acp_runtime.trace import render_timeline

nodes, edges = [], []
for chain in "ab":
    for k in range(4):
        nid = f"{chain}{k}"
        query = (ParamBinding.dependency("query", f"{chain}{k - 1}", "result") if k
                 else ParamBinding.literal("query", "1+1"))
        nodes.append(BlueprintNode(nid, chain, "calculator", "FUNCTION", "evaluate", params=(query,),
                                   expected_outputs=("result",)))
        if k:
            edges.append((f"{chain}{k - 1}", nid))
bp = build("two chains", nodes, edges)

registry = default_registry(delay=0.05)
for workers in (1, 2):
    _, trace, report = run(bp, registry, ExecutionPolicy(worker_count=workers))
    print(f"workers={workers}: {report.wall_ms:.0f}ms")
    print(render_timeline(trace, clock="wall", bucket_ms=50))
