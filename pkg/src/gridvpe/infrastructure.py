"""Catalog of heterogeneous compute resources and the network links between them.

A catalog is loaded from a JSON document of sites, clusters and links.
Clusters are declared by node count; node ids are generated as
``<cluster>-NN`` (zero padded to at least two digits, wider for large
clusters so that lexical and numeric order agree).

Bandwidth is given in Mbps and latency in ms; everything returned to
callers is in seconds and bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

from .errors import CatalogError, syntax_error

#: Gflop/s delivered by one core per GHz of clock when a cluster does not
#: declare ``gflops_per_core`` explicitly.
GFLOPS_PER_GHZ = 1.0


@dataclass(frozen=True)
class ComputeNode:
    id: str
    cluster_id: str
    site_id: str
    cores: int
    clock_ghz: float
    software: frozenset = frozenset()
    os: str = ""
    gflops_per_core: float | None = None


@dataclass(frozen=True)
class NetworkLink:
    from_scope: str
    to_scope: str
    bandwidth_mbps: float
    latency_ms: float = 0.0

    def connects(self, a: str, b: str) -> bool:
        return {self.from_scope, self.to_scope} == {a, b}

    def seconds(self, nbytes: int) -> float:
        return self.latency_ms / 1000.0 + nbytes * 8 / (self.bandwidth_mbps * 1e6)


@dataclass(frozen=True)
class Cluster:
    id: str
    site_id: str
    node_count: int
    cores_per_node: int
    clock_ghz: float
    software: frozenset = frozenset()
    os: str = ""
    intra_bandwidth_mbps: float | None = None
    intra_latency_ms: float = 0.0
    gflops_per_core: float | None = None
    node_ids: tuple = ()

    @property
    def intra_link(self) -> NetworkLink | None:
        if self.intra_bandwidth_mbps is None:
            return None
        return NetworkLink(self.id, self.id, self.intra_bandwidth_mbps, self.intra_latency_ms)


@dataclass(frozen=True)
class Site:
    id: str
    clusters: tuple = ()


def generated_node_ids(cluster_id: str, count: int) -> tuple:
    width = max(2, len(str(count)))
    return tuple(f"{cluster_id}-{i:0{width}d}" for i in range(1, count + 1))


@dataclass(frozen=True)
class InfrastructureCatalog:
    """Validated, immutable view over sites, clusters, nodes and links."""

    sites: tuple
    links: tuple = ()
    _nodes: Mapping = field(default=None, init=False, repr=False, compare=False)
    _clusters: Mapping = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.sites:
            raise CatalogError("empty catalog: no sites declared")
        seen_scopes: set = set()
        clusters: dict = {}
        nodes: dict = {}
        for site in self.sites:
            _claim(seen_scopes, site.id, "site")
            for cluster in site.clusters:
                _claim(seen_scopes, cluster.id, "cluster")
                clusters[cluster.id] = cluster
                for nid in cluster.node_ids:
                    if nid in nodes:
                        raise CatalogError(f"duplicate id {nid!r} (node)")
                    nodes[nid] = ComputeNode(
                        id=nid,
                        cluster_id=cluster.id,
                        site_id=site.id,
                        cores=cluster.cores_per_node,
                        clock_ghz=cluster.clock_ghz,
                        software=cluster.software,
                        os=cluster.os,
                        gflops_per_core=cluster.gflops_per_core,
                    )
        if not nodes:
            raise CatalogError("empty catalog: no compute nodes declared")
        if seen_scopes & set(nodes):
            clash = sorted(seen_scopes & set(nodes))[0]
            raise CatalogError(f"duplicate id {clash!r} (node id equals a site/cluster id)")
        pairs = set()
        for link in self.links:
            for end in (link.from_scope, link.to_scope):
                if end not in seen_scopes:
                    raise CatalogError(f"dangling link endpoint {end!r}")
            key = frozenset((link.from_scope, link.to_scope))
            if key in pairs:
                raise CatalogError(f"duplicate link {link.from_scope!r} <-> {link.to_scope!r}")
            pairs.add(key)
        object.__setattr__(self, "_nodes", dict(sorted(nodes.items())))
        object.__setattr__(self, "_clusters", clusters)

    @property
    def nodes(self) -> tuple:
        """All nodes sorted by id."""
        return tuple(self._nodes.values())

    @property
    def clusters(self) -> Mapping:
        return dict(self._clusters)

    def node(self, node_id: str) -> ComputeNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise CatalogError(f"unknown node {node_id!r}") from None

    def cluster(self, cluster_id: str) -> Cluster:
        try:
            return self._clusters[cluster_id]
        except KeyError:
            raise CatalogError(f"unknown cluster {cluster_id!r}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    @property
    def total_cores(self) -> int:
        return sum(n.cores for n in self._nodes.values())

    def link_between(self, a: ComputeNode, b: ComputeNode) -> NetworkLink | None:
        """Most specific link joining two nodes, or None."""
        if a.cluster_id == b.cluster_id:
            intra = self._clusters[a.cluster_id].intra_link
            if intra is not None:
                return intra
        for link in self.links:
            if link.connects(a.cluster_id, b.cluster_id):
                return link
        for link in self.links:
            if link.connects(a.site_id, b.site_id):
                return link
        return None

    def to_dict(self) -> dict:
        sites = []
        for site in self.sites:
            cls = []
            for c in site.clusters:
                d = {
                    "id": c.id,
                    "node_count": c.node_count,
                    "cores_per_node": c.cores_per_node,
                    "clock_ghz": c.clock_ghz,
                    "software": sorted(c.software),
                    "os": c.os,
                }
                if c.intra_bandwidth_mbps is not None:
                    d["intra_bandwidth_mbps"] = c.intra_bandwidth_mbps
                    d["intra_latency_ms"] = c.intra_latency_ms
                if c.gflops_per_core is not None:
                    d["gflops_per_core"] = c.gflops_per_core
                if c.node_ids != generated_node_ids(c.id, c.node_count):
                    d["node_ids"] = list(c.node_ids)
                cls.append(d)
            sites.append({"id": site.id, "clusters": cls})
        links = [
            {
                "from": l.from_scope,
                "to": l.to_scope,
                "bandwidth_mbps": l.bandwidth_mbps,
                "latency_ms": l.latency_ms,
            }
            for l in self.links
        ]
        return {"sites": sites, "links": links}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _claim(seen: set, ident, what: str) -> None:
    if not isinstance(ident, str) or not ident:
        raise CatalogError(f"{what} id must be a non-empty string, got {ident!r}")
    if ident in seen:
        raise CatalogError(f"duplicate id {ident!r} ({what})")
    seen.add(ident)


def _positive(value, what: str, integer: bool = False):
    ok_type = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok_type or not math.isfinite(value) or value <= 0:
        raise CatalogError(f"{what} must be a positive {'integer' if integer else 'number'}, got {value!r}")
    return value if integer else float(value)


def _non_negative(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
        raise CatalogError(f"{what} must be a non-negative number, got {value!r}")
    return float(value)


def _parse_cluster(raw: Mapping, site_id: str) -> Cluster:
    if not isinstance(raw, Mapping):
        raise CatalogError(f"cluster entry in site {site_id!r} must be an object")
    cid = raw.get("id")
    where = f"cluster {cid!r}"
    count = _positive(raw.get("node_count"), f"{where}: node_count", integer=True)
    cores = _positive(raw.get("cores_per_node"), f"{where}: cores_per_node", integer=True)
    clock = _positive(raw.get("clock_ghz"), f"{where}: clock_ghz")
    bw = raw.get("intra_bandwidth_mbps")
    if bw is not None:
        bw = _positive(bw, f"{where}: intra_bandwidth_mbps")
    lat = _non_negative(raw.get("intra_latency_ms", 0.0), f"{where}: intra_latency_ms")
    gpc = raw.get("gflops_per_core")
    if gpc is not None:
        gpc = _positive(gpc, f"{where}: gflops_per_core")
    software = raw.get("software", [])
    if not isinstance(software, list) or not all(isinstance(s, str) for s in software):
        raise CatalogError(f"{where}: software must be a list of strings")
    if "node_ids" in raw:
        ids = raw["node_ids"]
        if not isinstance(ids, list) or len(ids) != count or not all(isinstance(i, str) and i for i in ids):
            raise CatalogError(f"{where}: node_ids must list exactly node_count non-empty strings")
        node_ids = tuple(ids)
    else:
        node_ids = generated_node_ids(cid, count) if isinstance(cid, str) else ()
    return Cluster(
        id=cid,
        site_id=site_id,
        node_count=count,
        cores_per_node=cores,
        clock_ghz=clock,
        software=frozenset(software),
        os=str(raw.get("os", "")),
        intra_bandwidth_mbps=bw,
        intra_latency_ms=lat,
        gflops_per_core=gpc,
        node_ids=node_ids,
    )


def catalog_from_dict(doc: Mapping) -> InfrastructureCatalog:
    if not isinstance(doc, Mapping):
        raise CatalogError("catalog document must be a JSON object")
    raw_sites = doc.get("sites", [])
    if not isinstance(raw_sites, list):
        raise CatalogError("'sites' must be a list")
    sites = []
    for raw in raw_sites:
        if not isinstance(raw, Mapping):
            raise CatalogError("site entry must be an object")
        sid = raw.get("id")
        clusters = tuple(_parse_cluster(c, sid) for c in raw.get("clusters", []))
        sites.append(Site(sid, clusters))
    links = []
    for raw in doc.get("links", []):
        try:
            links.append(
                NetworkLink(
                    from_scope=raw["from"],
                    to_scope=raw["to"],
                    bandwidth_mbps=_positive(raw["bandwidth_mbps"], "link bandwidth_mbps"),
                    latency_ms=_non_negative(raw.get("latency_ms", 0.0), "link latency_ms"),
                )
            )
        except (KeyError, TypeError) as exc:
            raise CatalogError(f"malformed link entry {raw!r}") from exc
    return InfrastructureCatalog(tuple(sites), tuple(links))


def load_catalog(text: str) -> InfrastructureCatalog:
    """Parse and validate a catalog document.

    Raises:
        CatalogError: on a JSON syntax error (with line/column), a duplicate
            id, a link naming an unknown scope, or a catalog with no nodes.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise syntax_error(CatalogError, exc, "catalog") from None
    return catalog_from_dict(doc)


def load_testbed() -> InfrastructureCatalog:
    """The bundled four-resource testbed (two Sophia clusters, i-cluster2, three workstations)."""
    text = resources.files("gridvpe.data").joinpath("testbed.json").read_text()
    return load_catalog(text)


def query_nodes(
    catalog: InfrastructureCatalog,
    software: Iterable[str] = (),
    min_clock_ghz: float = 0.0,
) -> list:
    """Nodes carrying every tag in ``software`` and clocked at least ``min_clock_ghz``, by id."""
    need = frozenset(software)
    return [n for n in catalog.nodes if need <= n.software and n.clock_ghz >= min_clock_ghz]


def node_speed(node: ComputeNode) -> float:
    """Per-core speed in Gflop/s."""
    if node.gflops_per_core is not None:
        return node.gflops_per_core
    return node.clock_ghz * GFLOPS_PER_GHZ


def transfer_time(catalog: InfrastructureCatalog, from_node, to_node, nbytes: int) -> float:
    """Seconds to move ``nbytes`` between two nodes; zero when co-located."""
    if isinstance(nbytes, bool) or not isinstance(nbytes, int) or nbytes < 0:
        raise CatalogError(f"transfer size must be a non-negative integer, got {nbytes!r}")
    a = from_node if isinstance(from_node, ComputeNode) else catalog.node(from_node)
    b = to_node if isinstance(to_node, ComputeNode) else catalog.node(to_node)
    if a.id == b.id:
        return 0.0
    link = catalog.link_between(a, b)
    if link is None:
        raise CatalogError(f"no route between {a.id!r} and {b.id!r}")
    return link.seconds(nbytes)
