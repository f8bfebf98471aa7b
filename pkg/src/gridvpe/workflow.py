"""Workflow documents: components, data artifacts and an operator tree.

The tree is built from four node types::

    Task(component)  Sequence(children)  Parallel(children)  Loop(body, ...)

A loop repeats its body until the scalar payload of its condition
artifact drops below the threshold, or until ``max_iter`` iterations
have run. At least one of the two must be given.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterator, Mapping, Union

from .errors import BindingError, WorkflowError, syntax_error
from .infrastructure import InfrastructureCatalog, query_nodes
from .vpe import VirtualPrivateEnvironment, resolve_service


@dataclass(frozen=True)
class ComponentDecl:
    id: str
    kind: str
    work_gflop: float
    inputs: tuple = ()
    outputs: tuple = ()
    requires: frozenset = frozenset()
    params: Mapping = field(default_factory=dict, hash=False)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "kind": self.kind,
            "requires": {"software": sorted(self.requires)},
            "work_gflop": self.work_gflop,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
        }
        if self.params:
            d["params"] = dict(self.params)
        return d


@dataclass(frozen=True)
class DataArtifactSpec:
    name: str
    size_bytes: int = 0
    initial: object = None

    @property
    def has_initial(self) -> bool:
        return self.initial is not None

    def to_dict(self) -> dict:
        return {"name": self.name, "size_bytes": self.size_bytes, "initial": self.initial}


@dataclass(frozen=True)
class Task:
    component: str


@dataclass(frozen=True)
class Sequence:
    children: tuple = ()


@dataclass(frozen=True)
class Parallel:
    children: tuple = ()


@dataclass(frozen=True)
class Condition:
    artifact: str
    threshold: float


@dataclass(frozen=True)
class Loop:
    body: "Node"
    max_iter: int | None = None
    condition: Condition | None = None
    label: str = "loop"


Node = Union[Task, Sequence, Parallel, Loop]


@dataclass(frozen=True)
class WorkflowGraph:
    name: str
    components: tuple
    artifacts: tuple
    root: Node

    def component(self, cid: str) -> ComponentDecl:
        for c in self.components:
            if c.id == cid:
                return c
        raise WorkflowError(f"undeclared component {cid!r}")

    def artifact(self, name: str) -> DataArtifactSpec:
        for a in self.artifacts:
            if a.name == name:
                return a
        raise WorkflowError(f"undeclared artifact {name!r}")

    def tasks(self) -> list:
        """Component ids in flattened (depth-first) task order."""
        return [t.component for t in iter_tasks(self.root)]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "components": [c.to_dict() for c in self.components],
            "artifacts": [a.to_dict() for a in self.artifacts],
            "graph": node_to_dict(self.root),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def iter_tasks(node: Node) -> Iterator[Task]:
    if isinstance(node, Task):
        yield node
    elif isinstance(node, (Sequence, Parallel)):
        for child in node.children:
            yield from iter_tasks(child)
    elif isinstance(node, Loop):
        yield from iter_tasks(node.body)


def iter_loops(node: Node) -> Iterator[Loop]:
    if isinstance(node, Loop):
        yield node
        yield from iter_loops(node.body)
    elif isinstance(node, (Sequence, Parallel)):
        for child in node.children:
            yield from iter_loops(child)


def has_loop(node: Node) -> bool:
    return next(iter_loops(node), None) is not None


def node_to_dict(node: Node) -> dict:
    if isinstance(node, Task):
        return {"op": "task", "component": node.component}
    if isinstance(node, Sequence):
        return {"op": "seq", "children": [node_to_dict(c) for c in node.children]}
    if isinstance(node, Parallel):
        return {"op": "par", "children": [node_to_dict(c) for c in node.children]}
    d = {"op": "loop", "label": node.label, "max_iter": node.max_iter, "condition": None}
    if node.condition is not None:
        d["condition"] = {"artifact": node.condition.artifact, "threshold": node.condition.threshold}
    d["body"] = node_to_dict(node.body)
    return d


class _NodeParser:
    def __init__(self):
        self.loop_count = 0

    def parse(self, raw, path: str) -> Node:
        if not isinstance(raw, Mapping):
            raise WorkflowError(f"{path}: graph node must be an object")
        op = raw.get("op")
        if op == "task":
            comp = raw.get("component")
            if not isinstance(comp, str) or not comp:
                raise WorkflowError(f"{path}: task needs a 'component' string")
            return Task(comp)
        if op in ("seq", "par"):
            children = raw.get("children", [])
            if not isinstance(children, list):
                raise WorkflowError(f"{path}: 'children' must be a list")
            parsed = tuple(self.parse(c, f"{path}/{op}[{i}]") for i, c in enumerate(children))
            return Sequence(parsed) if op == "seq" else Parallel(parsed)
        if op == "loop":
            self.loop_count += 1
            label = raw.get("label") or f"loop{self.loop_count}"
            max_iter = raw.get("max_iter")
            cond_raw = raw.get("condition")
            if max_iter is None and cond_raw is None:
                raise WorkflowError(f"{path}: loop {label!r} has neither a condition nor max_iter")
            if max_iter is not None and (
                isinstance(max_iter, bool) or not isinstance(max_iter, int) or max_iter < 1
            ):
                raise WorkflowError(f"{path}: loop {label!r} max_iter must be a positive integer")
            condition = None
            if cond_raw is not None:
                if not isinstance(cond_raw, Mapping) or not isinstance(cond_raw.get("artifact"), str):
                    raise WorkflowError(f"{path}: loop {label!r} condition needs an 'artifact' name")
                thr = cond_raw.get("threshold")
                if isinstance(thr, bool) or not isinstance(thr, (int, float)) or not math.isfinite(thr):
                    raise WorkflowError(f"{path}: loop {label!r} condition threshold must be a number")
                condition = Condition(cond_raw["artifact"], float(thr))
            if "body" not in raw:
                raise WorkflowError(f"{path}: loop {label!r} has no body")
            body = self.parse(raw["body"], f"{path}/{label}")
            return Loop(body, max_iter, condition, label)
        raise WorkflowError(f"{path}: unknown op {op!r}")


def _names(raw, what: str) -> tuple:
    if not isinstance(raw, list) or not all(isinstance(n, str) and n for n in raw):
        raise WorkflowError(f"{what} must be a list of non-empty strings")
    return tuple(raw)


def _parse_component(raw) -> ComponentDecl:
    if not isinstance(raw, Mapping):
        raise WorkflowError("component entry must be an object")
    cid = raw.get("id")
    if not isinstance(cid, str) or not cid:
        raise WorkflowError("component id must be a non-empty string")
    kind = raw.get("kind")
    if not isinstance(kind, str) or not kind:
        raise WorkflowError(f"component {cid!r}: kind must be a non-empty string")
    work = raw.get("work_gflop")
    if isinstance(work, bool) or not isinstance(work, (int, float)) or not math.isfinite(work) or work <= 0:
        raise WorkflowError(f"component {cid!r}: work_gflop must be positive, got {work!r}")
    req = raw.get("requires", {}) or {}
    software = _names(req.get("software", []), f"component {cid!r}: requires.software")
    params = raw.get("params", {})
    if not isinstance(params, Mapping):
        raise WorkflowError(f"component {cid!r}: params must be an object")
    return ComponentDecl(
        id=cid,
        kind=kind,
        work_gflop=float(work),
        inputs=_names(raw.get("inputs", []), f"component {cid!r}: inputs"),
        outputs=_names(raw.get("outputs", []), f"component {cid!r}: outputs"),
        requires=frozenset(software),
        params=dict(params),
    )


def _parse_artifact(raw) -> DataArtifactSpec:
    if not isinstance(raw, Mapping) or not isinstance(raw.get("name"), str) or not raw["name"]:
        raise WorkflowError("artifact entry needs a non-empty 'name'")
    size = raw.get("size_bytes", 0)
    if isinstance(size, bool) or not isinstance(size, int) or size < 0:
        raise WorkflowError(f"artifact {raw['name']!r}: size_bytes must be a non-negative integer")
    return DataArtifactSpec(raw["name"], size, raw.get("initial"))


def workflow_from_dict(doc: Mapping) -> WorkflowGraph:
    if not isinstance(doc, Mapping):
        raise WorkflowError("workflow document must be a JSON object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise WorkflowError("workflow name must be a non-empty string")
    components = tuple(_parse_component(c) for c in doc.get("components", []))
    artifacts = tuple(_parse_artifact(a) for a in doc.get("artifacts", []))
    if "graph" not in doc:
        raise WorkflowError("workflow has no 'graph'")
    root = _NodeParser().parse(doc["graph"], "graph")
    graph = WorkflowGraph(name, components, artifacts, root)
    _check_structure(graph)
    return graph


def _check_structure(graph: WorkflowGraph) -> None:
    comp_ids = set()
    for c in graph.components:
        if c.id in comp_ids:
            raise WorkflowError(f"duplicate component id {c.id!r}")
        comp_ids.add(c.id)
    art_names = set()
    for a in graph.artifacts:
        if a.name in art_names:
            raise WorkflowError(f"duplicate artifact name {a.name!r}")
        art_names.add(a.name)
    for c in graph.components:
        for n in c.inputs + c.outputs:
            if n not in art_names:
                raise WorkflowError(f"component {c.id!r} references undeclared artifact {n!r}")
    for t in iter_tasks(graph.root):
        if t.component not in comp_ids:
            raise WorkflowError(f"task references undeclared component {t.component!r}")
    labels = set()
    for loop in iter_loops(graph.root):
        if loop.label in labels:
            raise WorkflowError(f"duplicate loop label {loop.label!r}")
        labels.add(loop.label)
        if loop.condition is None:
            continue
        produced = {o for cid in _direct_tasks(loop.body) for o in graph.component(cid).outputs}
        if loop.condition.artifact not in produced:
            raise WorkflowError(
                f"loop {loop.label!r}: condition artifact {loop.condition.artifact!r} "
                "is not produced by a component of its own body"
            )


def _direct_tasks(node: Node) -> list:
    """Tasks reachable without entering a nested loop."""
    if isinstance(node, Task):
        return [node.component]
    if isinstance(node, (Sequence, Parallel)):
        return [t for c in node.children for t in _direct_tasks(c)]
    return []


def load_workflow(text: str) -> WorkflowGraph:
    """Parse a workflow document and check its structural rules."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise syntax_error(WorkflowError, exc, "workflow") from None
    return workflow_from_dict(doc)


def load_demo_workflow() -> WorkflowGraph:
    text = resources.files("gridvpe.data").joinpath("aeroelastic_workflow.json").read_text()
    return load_workflow(text)


@dataclass(frozen=True)
class DataflowEntry:
    artifact: str
    producer: str | None
    consumers: tuple
    loop_carried: bool
    initial: bool


class _Audit:
    def __init__(self, graph: WorkflowGraph):
        self.graph = graph
        self.producer: dict = {}
        self.consumers: dict = {}
        self.carried: set = set()
        self.producer_comp: dict = {}

    def walk(self, node: Node, available: frozenset) -> frozenset:
        """Return artifacts guaranteed available after ``node`` runs."""
        g = self.graph
        if isinstance(node, Task):
            comp = g.component(node.component)
            for name in comp.inputs:
                self.consumers.setdefault(name, [])
                if comp.id not in self.consumers[name]:
                    self.consumers[name].append(comp.id)
                if name in available:
                    continue
                if g.artifact(name).has_initial:
                    # any producer is later in program order; the value is loop-carried
                    self.carried.add(name)
                    continue
                raise WorkflowError(
                    f"unproduced input: {comp.id!r} consumes {name!r} before any producer "
                    "and it declares no initial value"
                )
            for name in comp.outputs:
                prev = self.producer.get(name)
                if prev is not None and prev != ("task", id(node)):
                    raise WorkflowError(f"double producer: artifact {name!r} is produced more than once")
                self.producer[name] = ("task", id(node))
                self.producer_comp[name] = comp.id
            return available | frozenset(comp.outputs)
        if isinstance(node, Sequence):
            for child in node.children:
                available = self.walk(child, available)
            return available
        if isinstance(node, Parallel):
            footprints = [self._footprint(c) for c in node.children]
            for i, (ins_i, outs_i) in enumerate(footprints):
                for ins_j, outs_j in footprints[i + 1 :]:
                    both = outs_i & outs_j
                    if both:
                        raise WorkflowError(
                            f"double producer: parallel branches both produce {sorted(both)[0]!r}"
                        )
                    clash = (outs_i & ins_j) | (outs_j & ins_i)
                    if clash:
                        raise WorkflowError(
                            f"race: parallel branches read and write {sorted(clash)[0]!r}"
                        )
            out = available
            for child in node.children:
                out = out | self.walk(child, available)
            return out
        # Loop: the body is walked once; later iterations see what the body produced
        return self.walk(node.body, available)

    def _footprint(self, node: Node):
        ins, outs = set(), set()
        for t in iter_tasks(node):
            comp = self.graph.component(t.component)
            ins.update(comp.inputs)
            outs.update(comp.outputs)
        return frozenset(ins), frozenset(outs)


def validate_dataflow(graph: WorkflowGraph) -> list:
    """Check well-posedness of artifact flow and return one audit entry per artifact.

    Each consumed artifact must be produced earlier in the same iteration or
    declare an ``initial`` payload (in which case a later producer makes it
    loop-carried). Each artifact has at most one producing task, and
    parallel branches may not share an artifact that one of them writes.
    """
    audit = _Audit(graph)
    audit.walk(graph.root, frozenset())
    entries = []
    for a in graph.artifacts:
        prod = audit.producer_comp.get(a.name)
        entries.append(
            DataflowEntry(
                artifact=a.name,
                producer=prod,
                consumers=tuple(audit.consumers.get(a.name, ())),
                loop_carried=a.name in audit.carried and prod is not None,
                initial=a.has_initial,
            )
        )
    return entries


@dataclass(frozen=True)
class BoundWorkflow:
    graph: WorkflowGraph
    bindings: Mapping

    def binding(self, cid: str):
        return self.bindings[cid]

    def effective_requires(self, cid: str) -> frozenset:
        return self.graph.component(cid).requires | self.bindings[cid].requires


def bind(
    graph: WorkflowGraph,
    vpe: VirtualPrivateEnvironment,
    catalog: InfrastructureCatalog | None = None,
) -> BoundWorkflow:
    """Resolve every component's ``kind`` to exactly one builtin service of ``vpe``.

    With a catalog, also check that some node of the slice satisfies the
    combined software requirements of the component and its service.
    """
    bindings = {}
    for comp in graph.components:
        try:
            leaves = resolve_service(vpe, comp.kind)
        except Exception as exc:
            raise BindingError(f"unresolved kind {comp.kind!r} for component {comp.id!r}: {exc}") from None
        if len(leaves) != 1:
            raise BindingError(
                f"component {comp.id!r}: service {comp.kind!r} expands to {len(leaves)} builtins, expected 1"
            )
        bindings[comp.id] = leaves[0]
    bound = BoundWorkflow(graph, bindings)
    if catalog is not None:
        slice_nodes = set(vpe.resolved_nodes)
        for comp in graph.components:
            need = bound.effective_requires(comp.id)
            if not any(n.id in slice_nodes for n in query_nodes(catalog, need)):
                raise BindingError(
                    f"component {comp.id!r}: no node of VPE {vpe.name!r} provides {sorted(need)}"
                )
    return bound
