"""Compare the three execution modes on randomly faulted blueprints.

Each seed builds a small random DAG of ``concat``
steps, picks faults at 30% per node, and runs the same plan under every
mode. Assistance should never do worse than going without it.
"""

import random
import statistics

from acp_runtime import BlueprintNode, ExecutionPolicy, Mode, ParamBinding, build, run
from acp_runtime.tools import FaultBehavior, FaultPlan, default_registry, inject


def random_pipeline(rng, n):
    ids = [f"n{i:02d}" for i in range(n)]
    nodes, edges = [], []
    for i, nid in enumerate(ids):
        preds = [p for p in ids[:i] if rng.random() < 0.3][:2]
        left = (ParamBinding.dependency("left", preds[0], "text") if preds
                else ParamBinding.literal("left", nid))
        right = (ParamBinding.dependency("right", preds[1], "text") if len(preds) > 1
                 else ParamBinding.literal("right", "x"))
        nodes.append(BlueprintNode(nid, "t1", "concat", "FUNCTION", "join", params=(left, right),
                                   expected_outputs=("text",)))
        edges += [(p, nid) for p in preds]
    return build("random pipeline", nodes, edges)


rates = {m: [] for m in Mode}
for seed in range(40):
    rng = random.Random(seed)
    bp = random_pipeline(rng, rng.randint(6, 10))
    plan = FaultPlan.random(bp.nodes, 0.3, seed, behaviors=[FaultBehavior.THROW, FaultBehavior.EMPTY_PAYLOAD])
    registry = default_registry().map(lambda a: inject(plan, a))
    for mode in Mode:
        _, _, report = run(bp, registry, ExecutionPolicy(mode, worker_count=2, random_seed=seed))
        rates[mode].append(report.completion_rate)

for mode, values in rates.items():
    print(f"{mode.value:<13} mean completion {statistics.fmean(values):.3f}")
