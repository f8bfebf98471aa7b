"""Independent reference models used by the scheduler tests.

The evaluator below re-derives the timing of a loop-free workflow for a
*fixed* task-to-node assignment, without touching the simulator. Tasks are
booked in (ready time, label) order on the earliest-free core of their
node; inputs made on another node are staged one after another before the
compute starts.
"""

import itertools
import random

from gridvpe.infrastructure import node_speed, query_nodes, transfer_time
from gridvpe.workflow import Parallel, Sequence, Task, bind
from helpers import T, cluster, component, link, make_catalog, make_graph, make_vpe, par, seq


def predecessors(root):
    """Map component id -> set of component ids that must finish first."""
    before = {}

    def walk(node, done):
        if isinstance(node, Task):
            before[node.component] = set(done)
            return done | {node.component}
        if isinstance(node, Sequence):
            for c in node.children:
                done = walk(c, done)
            return done
        if isinstance(node, Parallel):
            out = set(done)
            for c in node.children:
                out |= walk(c, done)
            return out
        raise ValueError("loops are not supported by the oracle")

    walk(root, set())
    return before


def evaluate(graph, catalog, assignment):
    """Makespan and total transfer seconds of ``assignment`` (component id -> node id)."""
    pred = predecessors(graph.root)
    producer = {o: c.id for c in graph.components for o in c.outputs}
    cores = {n: [0.0] * catalog.node(n).cores for n in set(assignment.values())}
    finish, pending, transfer = {}, set(pred), 0.0
    while pending:
        avail = [c for c in pending if pred[c] <= finish.keys()]
        ready = {c: max((finish[p] for p in pred[c]), default=0.0) for c in avail}
        cid = min(avail, key=lambda c: (ready[c], f"{c}#1"))
        comp = graph.component(cid)
        nid = assignment[cid]
        free = cores[nid]
        k = free.index(min(free))
        t = max(ready[cid], free[k])
        for name in comp.inputs:
            src = producer.get(name)
            if src is None or assignment[src] == nid:
                continue
            dt = transfer_time(catalog, assignment[src], nid, graph.artifact(name).size_bytes)
            t += dt
            transfer += dt
        t += comp.work_gflop / node_speed(catalog.node(nid))
        free[k] = t
        finish[cid] = t
        pending.remove(cid)
    return max(finish.values(), default=0.0), transfer


def eligible(graph, catalog, vpe):
    members = set(vpe.resolved_nodes)
    # nodes unreachable from a producer are allowed here; instances are fully linked
    return {
        c.id: sorted(n.id for n in query_nodes(catalog, c.requires) if n.id in members)
        for c in graph.components
    }


def enumerate_optimum(graph, catalog, vpe):
    """Exhaustive minimum makespan over every eligible assignment."""
    choices = eligible(graph, catalog, vpe)
    ids = sorted(choices)
    best = None
    for combo in itertools.product(*(choices[c] for c in ids)):
        ms, _ = evaluate(graph, catalog, dict(zip(ids, combo)))
        best = ms if best is None else min(best, ms)
    return best


def lower_bound(graph, catalog, vpe):
    """Critical path using each task's fastest eligible node and free transfers."""
    choices = eligible(graph, catalog, vpe)
    pred = predecessors(graph.root)
    fastest = {
        c: graph.component(c).work_gflop / max(node_speed(catalog.node(n)) for n in choices[c])
        for c in pred
    }
    memo = {}

    def path(c):
        if c not in memo:
            memo[c] = fastest[c] + max((path(p) for p in pred[c]), default=0.0)
        return memo[c]

    return max((path(c) for c in pred), default=0.0)


def random_instance(rng: random.Random, n_tasks: int, n_nodes: int, shape: str, free_transfers=False):
    """A loop-free workflow over ``n_tasks`` tasks plus a ``n_nodes``-node catalog and VPE.

    ``shape`` is "seq" (a flat chain) or "tree" (random nesting of seq/par).
    With ``free_transfers`` every artifact is empty and every link has zero latency.
    """
    sites = {}
    for i in range(n_nodes):
        site = rng.choice(["s1", "s2"])
        soft = ["X"] if i == 0 or rng.random() < 0.5 else []
        sites.setdefault(site, []).append(
            cluster(f"n{i}", 1, rng.choice([1, 2]), rng.choice([0.5, 1.0, 2.0]), software=soft)
        )
    links = [
        link("s1", "s1", rng.choice([100.0, 1000.0]), rng.choice([0.0, 5.0])),
        link("s2", "s2", rng.choice([100.0, 1000.0]), rng.choice([0.0, 5.0])),
        link("s1", "s2", rng.choice([10.0, 100.0]), rng.choice([1.0, 50.0])),
    ]
    links = [l for l in links if all(s in sites for s in (l["from"], l["to"]))]
    if free_transfers:
        links = [dict(l, latency_ms=0.0) for l in links]
    catalog = make_catalog(sites, links)

    ids = [f"t{i}" for i in range(n_tasks)]
    if shape == "seq":
        tree = seq(*[T(c) for c in ids])
    else:
        def build(group):
            if len(group) == 1:
                return T(group[0])
            cuts = sorted(rng.sample(range(1, len(group)), rng.randint(1, len(group) - 1)))
            parts = [group[a:b] for a, b in zip([0] + cuts, cuts + [len(group)])]
            op = seq if rng.random() < 0.5 else par
            return op(*[build(p) for p in parts])

        tree = build(ids)

    stub = make_graph([component(c) for c in ids], tree)
    pred = predecessors(stub.root)
    comps = []
    for c in ids:
        reads = [f"o_{p}" for p in sorted(pred[c]) if rng.random() < 0.6]
        comps.append(
            component(
                c,
                work=rng.choice([1.0, 2.0, 3.0, 5.0]),
                inputs=reads,
                outputs=[f"o_{c}"],
                software=["X"] if rng.random() < 0.3 else [],
            )
        )
    sizes = [0] if free_transfers else [0, 10**6, 10**7]
    artifacts = [{"name": f"o_{c}", "size_bytes": rng.choice(sizes), "initial": None} for c in ids]
    graph = make_graph(comps, tree, artifacts=artifacts)
    vpe = make_vpe(catalog, "v", [(f"n{i}", 1) for i in range(n_nodes)])
    return graph, catalog, vpe, bind(graph, vpe, catalog)
