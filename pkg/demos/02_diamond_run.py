"""Run the bundled diamond blueprint, then break one node and run it again.

The first run is clean. The second injects a one-shot Throw into ``b``;
with assistance the node is retried and the run still completes, without
it ``b`` fails and its descendant ``d`` is skipped.
"""

from acp_runtime import ExecutionPolicy, Mode, aggregate, load_blueprint, run
from acp_runtime.planner import bundled
from acp_runtime.tools import FaultPlan, default_registry, inject
from acp_runtime.trace import render_timeline

bp = load_blueprint(bundled("diamond.json"))
print("layers:", bp.topological_layers())

final, trace, report = run(bp, default_registry(), ExecutionPolicy(worker_count=2))
print(f"\nclean run: rate {report.completion_rate:.2f}")
print(render_timeline(trace))
print(aggregate(final, bundled("diamond_template.md").read_text()))

plan = FaultPlan.load(bundled("diamond_faults.json"))
faulty = default_registry().map(lambda a: inject(plan, a))
for mode in (Mode.FULL_ACP, Mode.NO_ASSISTANCE):
    final, trace, report = run(bp, faulty, ExecutionPolicy(mode, worker_count=2))
    states = ", ".join(f"{n}={final.node(n).status.value}" for n in sorted(final.nodes))
    print(f"{mode.value:<13} rate {report.completion_rate:.2f}  {states}")
