"""Recover from a missing parameter by inserting a predecessor step.

The weather tool wants latitude and longitude, but the plan only passes
place names. The first attempt fails at request time with 601; the fault
handler applies a reroute recipe that adds a coordinates lookup in front
of the weather step, and the run finishes.
"""

from acp_runtime import EventKind, ExecutionPolicy, load_blueprint, run
from acp_runtime.fault import ReroutePolicy
from acp_runtime.planner import bundled
from acp_runtime.tools import load_registry

bp = load_blueprint(bundled("vacation/blueprint.json"))
registry = load_registry(bundled("vacation"))
policy = ReroutePolicy.load(bundled("vacation/reroute.json"))

print("before:", sorted(bp.nodes))
final, trace, report = run(bp, registry, ExecutionPolicy(), policy)

for kind in (EventKind.ERROR_RAISED, EventKind.ASSISTANCE_POSTED, EventKind.RESOLUTION_APPLIED):
    for e in trace.of_kind(kind):
        print(f"  [{e.tick:3d}] {e.node:<16} {kind.value:<18} {e.detail[:70]}")

print("after: ", sorted(final.nodes))
print("new edge present:", ("s1.step2_coords", "s1.step2") in final.edges)
print(f"completion rate {report.completion_rate:.2f}")
