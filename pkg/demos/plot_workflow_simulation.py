"""
Simulating a small workflow
===========================

A producer feeds three parallel consumers. The simulator places each task on
the node with the earliest completion. Here the third consumer waits for a
free core on the fast node rather than paying for a transfer to a slower one.
"""

import json

from gridvpe import bind, create_vpe, load_testbed, load_vpe_spec, load_workflow, simulate

catalog = load_testbed()

doc = {
    "name": "fan-out",
    "components": [
        {"id": "make", "kind": "noop", "work_gflop": 8.0, "outputs": ["mesh"], "params": {"n_outputs": 1}},
        {"id": "left", "kind": "noop", "work_gflop": 4.0, "inputs": ["mesh"], "params": {"n_outputs": 0}},
        {"id": "right", "kind": "noop", "work_gflop": 4.0, "inputs": ["mesh"], "params": {"n_outputs": 0}},
        {"id": "extra", "kind": "noop", "work_gflop": 1.0, "inputs": ["mesh"], "params": {"n_outputs": 0}},
    ],
    "artifacts": [{"name": "mesh", "size_bytes": 50_000_000, "initial": None}],
    "graph": {"op": "seq", "children": [
        {"op": "task", "component": "make"},
        {"op": "par", "children": [{"op": "task", "component": "left"}, {"op": "task", "component": "right"},
                                {"op": "task", "component": "extra"}]},
    ]},
}
graph = load_workflow(json.dumps(doc))

vpe = create_vpe(catalog, load_vpe_spec(json.dumps({
    "name": "demo",
    "slices": [{"cluster": "nina", "node_count": 1}, {"cluster": "pf", "node_count": 1}],
    "services": [{"name": "noop", "kind": "noop"}],
})))

###############################################################################
# One trace per environment; events come out in time order
trace, = simulate([(bind(graph, vpe, catalog), vpe)], catalog)
for e in trace.events:
    print(f"{e.t:8.3f}  {e.kind:10s} {e.task or e.artifact:8s} {e.node}")
print(trace.metrics())

###############################################################################
# The JSON-Lines form is what ``gridvpe run`` writes
print(trace.to_jsonl().splitlines()[-1])
