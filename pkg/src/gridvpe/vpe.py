"""Virtual private environments: named resource slices plus a service registry.

Slices of different environments may overlap; nothing here arbitrates
between them (contention is resolved by the simulator). Each environment
owns a hierarchical registry of service bindings. A binding is either a
builtin (``kind`` names the builtin component) or a composite whose
children form a nested scope.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

from .errors import VpeError, syntax_error
from .infrastructure import InfrastructureCatalog

COMPOSITE = "composite"


@dataclass(frozen=True)
class ServiceBinding:
    name: str
    kind: str
    children: tuple = ()
    requires: frozenset = frozenset()

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise VpeError(f"service name must be a non-empty string, got {self.name!r}")
        if not isinstance(self.kind, str) or not self.kind:
            raise VpeError(f"service {self.name!r}: kind must be a non-empty string")
        if self.kind == COMPOSITE and not self.children:
            raise VpeError(f"composite service {self.name!r} needs at least one child")
        if self.kind != COMPOSITE and self.children:
            raise VpeError(f"builtin service {self.name!r} cannot have children")
        _check_unique(self.children, f"scope {self.name!r}")

    @property
    def is_composite(self) -> bool:
        return self.kind == COMPOSITE

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        d["requires"] = {"software": sorted(self.requires)}
        return d


@dataclass(frozen=True)
class SliceSpec:
    cluster: str
    node_count: int | None = None
    node_ids: tuple = ()


@dataclass(frozen=True)
class VpeSpec:
    name: str
    slices: tuple = ()
    services: tuple = ()

    def to_dict(self) -> dict:
        slices = []
        for s in self.slices:
            if s.node_count is not None:
                slices.append({"cluster": s.cluster, "node_count": s.node_count})
            else:
                slices.append({"cluster": s.cluster, "node_ids": list(s.node_ids)})
        return {
            "name": self.name,
            "slices": slices,
            "services": [b.to_dict() for b in self.services],
        }


@dataclass(frozen=True)
class VirtualPrivateEnvironment:
    """Immutable snapshot of one environment.

    ``services`` holds the top-level scope; composite bindings carry
    their own nested scopes in ``children``.
    """

    name: str
    resolved_nodes: tuple
    services: tuple = ()

    def service_names(self) -> list:
        return [b.name for b in self.services]


def _check_unique(bindings, where: str) -> None:
    seen = set()
    for b in bindings:
        if b.name in seen:
            raise VpeError(f"duplicate service name {b.name!r} in {where}")
        seen.add(b.name)


def binding_from_dict(raw: Mapping) -> ServiceBinding:
    if not isinstance(raw, Mapping):
        raise VpeError("service entry must be an object")
    req = raw.get("requires", {}) or {}
    software = req.get("software", []) if isinstance(req, Mapping) else None
    if not isinstance(software, list) or not all(isinstance(s, str) for s in software):
        raise VpeError(f"service {raw.get('name')!r}: requires.software must be a list of strings")
    return ServiceBinding(
        name=raw.get("name"),
        kind=raw.get("kind"),
        children=tuple(binding_from_dict(c) for c in raw.get("children", [])),
        requires=frozenset(software),
    )


def vpe_spec_from_dict(doc: Mapping) -> VpeSpec:
    if not isinstance(doc, Mapping):
        raise VpeError("VPE document must be a JSON object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise VpeError("VPE name must be a non-empty string")
    slices = []
    for raw in doc.get("slices", []):
        if not isinstance(raw, Mapping) or not isinstance(raw.get("cluster"), str):
            raise VpeError(f"VPE {name!r}: slice entry needs a 'cluster' string")
        if ("node_count" in raw) == ("node_ids" in raw):
            raise VpeError(f"VPE {name!r}: slice of {raw['cluster']!r} needs exactly one of node_count/node_ids")
        if "node_count" in raw:
            count = raw["node_count"]
            if isinstance(count, bool) or not isinstance(count, int) or count < 1:
                raise VpeError(f"VPE {name!r}: node_count must be a positive integer")
            slices.append(SliceSpec(raw["cluster"], node_count=count))
        else:
            ids = raw["node_ids"]
            if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
                raise VpeError(f"VPE {name!r}: node_ids must be a list of strings")
            slices.append(SliceSpec(raw["cluster"], node_ids=tuple(ids)))
    services = tuple(binding_from_dict(s) for s in doc.get("services", []))
    return VpeSpec(name, tuple(slices), services)


def load_vpe_spec(text: str) -> VpeSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise syntax_error(VpeError, exc, "VPE spec") from None
    return vpe_spec_from_dict(doc)


def load_demo_vpe_spec() -> VpeSpec:
    text = resources.files("gridvpe.data").joinpath("demo_vpe.json").read_text()
    return load_vpe_spec(text)


def create_vpe(catalog: InfrastructureCatalog, spec: VpeSpec) -> VirtualPrivateEnvironment:
    """Resolve a spec's slices against ``catalog``.

    A count-based slice takes the lowest node ids of the cluster; an
    explicit id list is kept verbatim. Duplicate nodes across slices are
    kept once, at their first position.
    """
    if not isinstance(spec.name, str) or not spec.name:
        raise VpeError("VPE name must be a non-empty string")
    resolved: list = []
    for s in spec.slices:
        clusters = catalog.clusters
        if s.cluster not in clusters:
            raise VpeError(f"VPE {spec.name!r}: unknown cluster {s.cluster!r}")
        available = sorted(clusters[s.cluster].node_ids)
        if s.node_count is not None:
            if s.node_count > len(available):
                raise VpeError(
                    f"VPE {spec.name!r}: slice exceeds cluster {s.cluster!r} "
                    f"({s.node_count} requested, {len(available)} available)"
                )
            picked = available[: s.node_count]
        else:
            members = set(available)
            for nid in s.node_ids:
                if nid not in members:
                    raise VpeError(f"VPE {spec.name!r}: node {nid!r} is not in cluster {s.cluster!r}")
            picked = list(s.node_ids)
        for nid in picked:
            if nid not in resolved:
                resolved.append(nid)
    _check_unique(spec.services, f"VPE {spec.name!r}")
    return VirtualPrivateEnvironment(spec.name, tuple(resolved), tuple(spec.services))


def _insert(bindings: tuple, scope: tuple, binding: ServiceBinding, where: str) -> tuple:
    if not scope:
        if any(b.name == binding.name for b in bindings):
            raise VpeError(f"name collision: service {binding.name!r} already registered in {where}")
        return bindings + (binding,)
    head, rest = scope[0], scope[1:]
    out = []
    found = False
    for b in bindings:
        if b.name == head and b.is_composite:
            found = True
            b = dataclasses.replace(b, children=_insert(b.children, rest, binding, f"scope {head!r}"))
        out.append(b)
    if not found:
        raise VpeError(f"unknown scope {head!r}")
    return tuple(out)


def register_service(vpe: VirtualPrivateEnvironment, binding: ServiceBinding, scope: tuple = ()):
    """Return a copy of ``vpe`` with ``binding`` added to the given scope.

    ``scope`` is a path of composite names from the top level; the binding
    becomes visible to lookups made from that scope and its descendants.
    """
    services = _insert(vpe.services, tuple(scope), binding, f"VPE {vpe.name!r}")
    return dataclasses.replace(vpe, services=services)


def _scope_chain(vpe: VirtualPrivateEnvironment, scope: tuple) -> list:
    """Scopes from innermost to outermost as (bindings, inherited requires)."""
    chain = [(vpe.services, frozenset())]
    current = vpe.services
    inherited = frozenset()
    for name in scope:
        match = next((b for b in current if b.name == name and b.is_composite), None)
        if match is None:
            raise VpeError(f"unknown scope {name!r}")
        inherited = inherited | match.requires
        current = match.children
        chain.append((current, inherited))
    return chain[::-1]


def _leaves(binding: ServiceBinding, inherited: frozenset) -> list:
    req = inherited | binding.requires
    if not binding.is_composite:
        return [binding if req == binding.requires else dataclasses.replace(binding, requires=req)]
    out = []
    for child in binding.children:
        out.extend(_leaves(child, req))
    return out


def resolve_service(vpe: VirtualPrivateEnvironment, name: str, scope: tuple = ()) -> list:
    """Leaf builtin bindings that ``name`` stands for.

    The innermost scope containing ``name`` wins. Composites expand
    depth-first in declaration order; each leaf carries the union of its
    own and its ancestors' software requirements.
    """
    for bindings, inherited in _scope_chain(vpe, tuple(scope)):
        for b in bindings:
            if b.name == name:
                return _leaves(b, inherited)
    raise VpeError(f"unknown service {name!r} in VPE {vpe.name!r}")


@dataclass(frozen=True)
class VpeRegistry:
    """All live environments, keyed by name, plus which ones are busy."""

    vpes: Mapping = field(default_factory=dict)
    busy: frozenset = frozenset()

    def __getitem__(self, name: str) -> VirtualPrivateEnvironment:
        try:
            return self.vpes[name]
        except KeyError:
            raise VpeError(f"unknown VPE {name!r}") from None

    def __contains__(self, name) -> bool:
        return name in self.vpes

    def __len__(self) -> int:
        return len(self.vpes)

    def add(self, vpe: VirtualPrivateEnvironment) -> "VpeRegistry":
        if vpe.name in self.vpes:
            raise VpeError(f"VPE {vpe.name!r} already exists")
        return VpeRegistry({**self.vpes, vpe.name: vpe}, self.busy)

    def mark_busy(self, name: str) -> "VpeRegistry":
        self[name]
        return VpeRegistry(self.vpes, self.busy | {name})

    def mark_idle(self, name: str) -> "VpeRegistry":
        self[name]
        return VpeRegistry(self.vpes, self.busy - {name})


def teardown_vpe(registry: VpeRegistry, name: str) -> VpeRegistry:
    if name not in registry:
        raise VpeError(f"unknown VPE {name!r}")
    if name in registry.busy:
        raise VpeError(f"VPE {name!r} is busy: a workflow is executing")
    return VpeRegistry({k: v for k, v in registry.vpes.items() if k != name}, registry.busy)
