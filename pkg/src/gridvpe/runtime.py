"""Deterministic discrete-event execution of bound workflows on VPE slices.

Timing model
------------
A task needs one core. When it becomes ready it is placed on the slice
node that minimises its estimated completion::

    max(ready, earliest free core) + input staging + work_gflop / node_speed

ties going to the lowest node id. The core is held from acquisition to
completion; inputs produced on other nodes are staged one after the other
in declaration order, each costing ``transfer_time``. Initial artifact
payloads are assumed present everywhere.

Several runs may be simulated together. Runs on overlapping slices
compete for cores (ready tasks at equal times are served by
``(vpe, task label)``); runs on disjoint slices cannot influence each
other. A crash in a run fails that run only: tasks already started finish,
nothing new starts.

Task labels are ``<component>#<n>`` where ``n`` counts how many times the
component has been scheduled in its run, so inside a single loop ``n`` is
the iteration number. Loop exits are labelled ``<loop label>#<iterations>``.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .components import BUILTINS
from .errors import PlacementError, SimulationError, ValidationError
from .infrastructure import InfrastructureCatalog, node_speed, transfer_time
from .vpe import VirtualPrivateEnvironment
from .workflow import BoundWorkflow, Loop, Parallel, Sequence, Task, iter_tasks

EVENT_KINDS = ("task_end", "task_fail", "xfer_end", "loop_exit", "xfer_start", "task_start")
KIND_PRIORITY = {k: i for i, k in enumerate(EVENT_KINDS)}
_READY = len(EVENT_KINDS)  # placement decisions run after every trace event at the same instant

EVENT_FIELDS = ("t", "kind", "vpe", "task", "node", "artifact", "bytes")


def fmt_number(x) -> str:
    """Locale-free JSON number with 9 significant digits."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".9g")


@dataclass(frozen=True)
class SimEvent:
    t: float
    kind: str
    vpe: str
    task: str | None = None
    node: str | None = None
    artifact: str | None = None
    bytes: int | None = None

    def sort_key(self):
        return (self.t, KIND_PRIORITY[self.kind], self.vpe, self.task or "", self.artifact or "")

    def to_json(self) -> str:
        parts = []
        for name in EVENT_FIELDS:
            v = getattr(self, name)
            if v is None:
                s = "null"
            elif isinstance(v, str):
                s = json.dumps(v)
            else:
                s = fmt_number(v)
            parts.append(f'"{name}":{s}')
        return "{" + ",".join(parts) + "}"


@dataclass
class ExecutionTrace:
    vpe: str
    workflow: str
    events: tuple = ()
    payloads: dict = field(default_factory=dict)
    status: str = "completed"
    error: str | None = None
    history: dict = field(default_factory=dict)

    def metrics(self) -> dict:
        return trace_metrics(self)

    def to_jsonl(self) -> str:
        lines = [e.to_json() for e in self.events]
        m = self.metrics()
        summary = ",".join(
            [
                f'"makespan_s":{fmt_number(m["makespan_s"])}',
                f'"total_transfer_s":{fmt_number(m["total_transfer_s"])}',
                f'"task_count":{m["task_count"]}',
                f'"iterations":{m["iterations"]}',
                f'"status":{json.dumps(self.status)}',
            ]
        )
        lines.append("{" + summary + "}")
        return "\n".join(lines) + "\n"


def trace_metrics(trace: ExecutionTrace) -> dict:
    makespan = max((e.t for e in trace.events), default=0.0)
    spans: dict = {}
    for e in trace.events:
        if e.kind in ("xfer_start", "xfer_end"):
            spans.setdefault((e.task, e.artifact), {})[e.kind] = e.t
    transfer = sum(s["xfer_end"] - s["xfer_start"] for s in spans.values())
    iterations = sum(int(e.task.rsplit("#", 1)[1]) for e in trace.events if e.kind == "loop_exit")
    return {
        "makespan_s": float(makespan),
        "total_transfer_s": float(transfer),
        "task_count": sum(1 for e in trace.events if e.kind == "task_start"),
        "iterations": iterations,
    }


@dataclass(frozen=True)
class TaskInstance:
    workflow: str
    component: str
    iteration: int
    ready_time: float
    inputs: tuple = ()  # (artifact, source node or None, size_bytes)
    placement: str | None = None

    @property
    def label(self) -> str:
        return f"{self.component}#{self.iteration}"


@dataclass(frozen=True)
class FailureInjection:
    vpe: str
    component: str
    iteration: int = 1
    mode: str = "crash"


def parse_failure(spec: str, default_vpe: str) -> FailureInjection:
    """Parse ``[vpe:]component@iteration``."""
    vpe, _, rest = spec.rpartition(":")
    comp, sep, it = rest.partition("@")
    if not comp or not sep:
        raise ValidationError(f"failure spec {spec!r} is not of the form [vpe:]component@iteration")
    try:
        iteration = int(it)
    except ValueError:
        raise ValidationError(f"failure spec {spec!r}: iteration must be an integer") from None
    if iteration < 1:
        raise ValidationError(f"failure spec {spec!r}: iteration must be >= 1")
    return FailureInjection(vpe or default_vpe, comp, iteration)


@dataclass(frozen=True)
class Placement:
    node: str
    start: float  # core acquired
    legs: tuple  # (artifact, source node, size_bytes, seconds) per staged input
    compute_s: float

    @property
    def transfer_s(self) -> float:
        return sum(leg[3] for leg in self.legs)

    @property
    def exec_start(self) -> float:
        t = self.start
        for leg in self.legs:
            t += leg[3]
        return t

    @property
    def completion(self) -> float:
        return self.exec_start + self.compute_s


def place_task(
    task: TaskInstance,
    bound: BoundWorkflow,
    vpe: VirtualPrivateEnvironment,
    node_states: Mapping,
    catalog: InfrastructureCatalog,
) -> Placement:
    """Pick the slice node with the earliest estimated completion for ``task``.

    ``node_states`` maps node id to a list of per-core free times.
    """
    need = bound.effective_requires(task.component)
    work = bound.graph.component(task.component).work_gflop
    best = None
    for nid in sorted(vpe.resolved_nodes):
        node = catalog.node(nid)
        if not need <= node.software:
            continue
        try:
            legs = tuple(
                (name, src, size, transfer_time(catalog, src, nid, size))
                for name, src, size in task.inputs
                if src is not None and src != nid
            )
        except ValidationError:
            continue  # unreachable from an input's location
        start = max(task.ready_time, min(node_states[nid]))
        cand = Placement(nid, start, legs, work / node_speed(node))
        if best is None or cand.completion < best.completion:
            best = cand
    if best is None:
        raise PlacementError(
            f"no eligible node for {task.label} in VPE {vpe.name!r} (requires {sorted(need)})"
        )
    return best


@dataclass(frozen=True)
class Run:
    workflow: BoundWorkflow
    vpe: VirtualPrivateEnvironment
    components: Mapping | None = None  # builtin id -> callable, overrides the registry


class _Activity:
    """Book-keeping for one placed task; flags drive fail-fast cancellation."""

    __slots__ = ("task", "placement", "inputs", "started", "done")

    def __init__(self, task, placement, inputs):
        self.task = task
        self.placement = placement
        self.inputs = inputs
        self.started = False
        self.done: Callable | None = None


class _RunState:
    def __init__(self, run: Run, failures):
        self.run = run
        self.vpe = run.vpe.name
        self.graph = run.workflow.graph
        self.events: list = []
        self.values: dict = {}
        self.location: dict = {}
        self.history: dict = {}
        self.counter: dict = {}
        self.failed_at: float | None = None
        self.status = "completed"
        self.error: str | None = None
        self.exhausted = False
        self.crashes = {(f.component, f.iteration) for f in failures}
        for a in self.graph.artifacts:
            if a.has_initial:
                self.values[a.name] = a.initial
                self.location[a.name] = None

    def fail(self, t: float, message: str) -> None:
        if self.failed_at is None:
            self.failed_at = t
            self.status = "failed"
            self.error = message

    def builtin(self, kind: str):
        table = self.run.components or {}
        fn = table.get(kind) or BUILTINS.get(kind)
        if fn is None:
            raise SimulationError(f"no implementation for builtin {kind!r}")
        return fn


class _Simulator:
    def __init__(self, runs, catalog, failures):
        self.catalog = catalog
        self.heap: list = []
        self.seq = itertools.count()
        names = [r.vpe.name for r in runs]
        if len(set(names)) != len(names):
            raise ValidationError("each VPE may host at most one simulated workflow at a time")
        by_vpe: dict = {n: [] for n in names}
        for f in failures:
            if f.vpe not in by_vpe:
                raise ValidationError(f"failure injection targets unknown VPE {f.vpe!r}")
            run = runs[names.index(f.vpe)]
            if f.component not in {c.id for c in run.workflow.graph.components}:
                raise ValidationError(f"failure injection targets unknown component {f.component!r}")
            by_vpe[f.vpe].append(f)
        self.states = [_RunState(r, by_vpe[r.vpe.name]) for r in runs]
        self.node_states: dict = {}
        for r in runs:
            for nid in r.vpe.resolved_nodes:
                self.node_states.setdefault(nid, [0.0] * catalog.node(nid).cores)

    def push(self, t, prio, vpe, label, action):
        heapq.heappush(self.heap, (t, prio, vpe, label, next(self.seq), action))

    def run(self) -> list:
        for st in self.states:
            self.execute(st, st.graph.root, 0.0, lambda t, st=st: None)
        while self.heap:
            *_, action = heapq.heappop(self.heap)
            action()
        traces = []
        for st in self.states:
            status = st.status
            if status == "completed" and st.exhausted:
                status = "diverged"
            st.events.sort(key=SimEvent.sort_key)
            traces.append(
                ExecutionTrace(
                    vpe=st.vpe,
                    workflow=st.graph.name,
                    events=tuple(st.events),
                    payloads=dict(st.values),
                    status=status,
                    error=st.error,
                    history=st.history,
                )
            )
        return traces

    # operator semantics -------------------------------------------------

    def execute(self, st: _RunState, node, t: float, k: Callable) -> None:
        if st.failed_at is not None:
            return
        if isinstance(node, Task):
            self.schedule_task(st, node.component, t, k)
        elif isinstance(node, Sequence):
            self.execute_seq(st, node.children, 0, t, k)
        elif isinstance(node, Parallel):
            self.execute_par(st, node.children, t, k)
        elif isinstance(node, Loop):
            self.execute_loop(st, node, 1, t, k)
        else:
            raise SimulationError(f"unknown graph node {node!r}")

    def execute_seq(self, st, children, i, t, k):
        if i == len(children):
            k(t)
            return
        self.execute(st, children[i], t, lambda te: self.execute_seq(st, children, i + 1, te, k))

    def execute_par(self, st, children, t, k):
        if not children:
            k(t)
            return
        pending = [len(children), t]

        def branch_done(te):
            pending[0] -= 1
            pending[1] = max(pending[1], te)
            if pending[0] == 0:
                k(pending[1])

        for child in children:
            self.execute(st, child, t, branch_done)

    def execute_loop(self, st, loop: Loop, i: int, t: float, k):
        if next(iter_tasks(loop.body), None) is None:
            # an empty body cannot produce a condition artifact; only max_iter applies
            st.events.append(SimEvent(t, "loop_exit", st.vpe, task=f"{loop.label}#{loop.max_iter}"))
            k(t)
            return

        def body_done(te):
            met = False
            if loop.condition is not None:
                value = st.values.get(loop.condition.artifact)
                try:
                    met = float(value) < loop.condition.threshold
                except (TypeError, ValueError):
                    st.fail(te, f"loop {loop.label!r}: condition artifact is not a scalar")
                    return
            if met or (loop.max_iter is not None and i >= loop.max_iter):
                if not met and loop.condition is not None:
                    st.exhausted = True
                st.events.append(SimEvent(te, "loop_exit", st.vpe, task=f"{loop.label}#{i}"))
                k(te)
            else:
                self.execute_loop(st, loop, i + 1, te, k)

        self.execute(st, loop.body, t, body_done)

    # tasks ----------------------------------------------------------------

    def schedule_task(self, st, cid, t, k):
        n = st.counter.get(cid, 0) + 1
        st.counter[cid] = n
        label = f"{cid}#{n}"
        self.push(t, _READY, st.vpe, label, lambda: self.place(st, cid, n, t, k))

    def place(self, st: _RunState, cid: str, n: int, t: float, k):
        if st.failed_at is not None:
            return
        comp = st.graph.component(cid)
        inputs = tuple(
            (name, st.location.get(name), st.graph.artifact(name).size_bytes) for name in comp.inputs
        )
        task = TaskInstance(st.graph.name, cid, n, t, inputs)
        try:
            p = place_task(task, st.run.workflow, st.run.vpe, self.node_states, self.catalog)
        except PlacementError as exc:
            st.fail(t, str(exc))
            return
        cores = self.node_states[p.node]
        cores[cores.index(min(cores))] = p.completion
        snapshot = [st.values.get(name) for name in comp.inputs]
        act = _Activity(task, p, snapshot)
        act.done = k
        label = task.label
        cursor = p.start
        for name, src, size, dt in p.legs:
            ev = dict(task=label, node=f"{src}->{p.node}", artifact=name, bytes=size)
            self.push(cursor, KIND_PRIORITY["xfer_start"], st.vpe, label,
                      lambda c=cursor, ev=ev: self.xfer(st, "xfer_start", c, c, ev))
            self.push(cursor + dt, KIND_PRIORITY["xfer_end"], st.vpe, label,
                      lambda c=cursor, ev=ev, e=cursor + dt: self.xfer(st, "xfer_end", c, e, ev))
            cursor += dt
        begin, end = cursor, cursor + p.compute_s
        self.push(begin, KIND_PRIORITY["task_start"], st.vpe, label, lambda: self.task_start(st, act, begin))
        crash = (cid, n) in st.crashes
        self.push(end, KIND_PRIORITY["task_fail" if crash else "task_end"], st.vpe, label,
                  lambda: self.task_end(st, act, end, crash))

    def _cancelled(self, st, t) -> bool:
        return st.failed_at is not None and t >= st.failed_at

    def xfer(self, st, kind, began, t, ev):
        # a transfer that began before the run failed still completes
        if not self._cancelled(st, began):
            st.events.append(SimEvent(t, kind, st.vpe, **ev))

    def task_start(self, st, act, t):
        if self._cancelled(st, t):
            return
        act.started = True
        st.events.append(SimEvent(t, "task_start", st.vpe, task=act.task.label, node=act.placement.node))

    def task_end(self, st, act, t, crash):
        if not act.started:
            return
        label, nid = act.task.label, act.placement.node
        comp = st.graph.component(act.task.component)
        if crash:
            st.events.append(SimEvent(t, "task_fail", st.vpe, task=label, node=nid))
            st.fail(t, f"injected crash in {label}")
            return
        try:
            kind = st.run.workflow.binding(comp.id).kind
            outputs = list(st.builtin(kind)(comp.params, act.inputs))
            if len(outputs) != len(comp.outputs):
                raise SimulationError(
                    f"{label}: builtin {kind!r} returned {len(outputs)} outputs, expected {len(comp.outputs)}"
                )
        except Exception as exc:
            st.events.append(SimEvent(t, "task_fail", st.vpe, task=label, node=nid))
            st.fail(t, f"{label}: {exc}")
            return
        st.events.append(SimEvent(t, "task_end", st.vpe, task=label, node=nid))
        if st.failed_at is not None:
            return
        for name, value in zip(comp.outputs, outputs):
            st.values[name] = value
            st.location[name] = nid
            st.history.setdefault(name, []).append(value)
        act.done(t)


def simulate(runs, catalog: InfrastructureCatalog, failures=()) -> list:
    """Simulate ``runs`` together and return one trace per run, in order.

    ``runs`` holds :class:`Run` objects or ``(bound_workflow, vpe)`` pairs.
    There is no randomness: equal inputs always give equal traces.
    """
    runs = [r if isinstance(r, Run) else Run(*r) for r in runs]
    return _Simulator(runs, catalog, list(failures)).run()


def write_trace(trace: ExecutionTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace.to_jsonl())
