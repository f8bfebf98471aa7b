"""Builders for small catalogs, VPEs and workflows used across the tests."""

import json

from gridvpe.infrastructure import catalog_from_dict
from gridvpe.vpe import create_vpe, vpe_spec_from_dict
from gridvpe.workflow import workflow_from_dict


def cluster(cid, count=1, cores=1, clock=1.0, software=(), bw=1000.0, lat=0.0):
    return {
        "id": cid,
        "node_count": count,
        "cores_per_node": cores,
        "clock_ghz": clock,
        "software": list(software),
        "os": "linux",
        "intra_bandwidth_mbps": bw,
        "intra_latency_ms": lat,
    }


def make_catalog(sites, links=()):
    """sites: {site_id: [cluster dicts]}"""
    return catalog_from_dict(
        {
            "sites": [{"id": s, "clusters": cs} for s, cs in sites.items()],
            "links": list(links),
        }
    )


def link(a, b, bw=1000.0, lat=0.0):
    return {"from": a, "to": b, "bandwidth_mbps": bw, "latency_ms": lat}


def make_vpe(catalog, name, slices, services=None):
    """slices: list of (cluster, count) or (cluster, [ids])."""
    raw_slices = []
    for c, what in slices:
        if isinstance(what, int):
            raw_slices.append({"cluster": c, "node_count": what})
        else:
            raw_slices.append({"cluster": c, "node_ids": list(what)})
    if services is None:
        services = [{"name": k, "kind": k} for k in ("noop", "scale", "fail")]
    return create_vpe(catalog, vpe_spec_from_dict({"name": name, "slices": raw_slices, "services": services}))


def component(cid, work=1.0, inputs=(), outputs=(), kind="noop", software=(), params=None):
    d = {
        "id": cid,
        "kind": kind,
        "requires": {"software": list(software)},
        "work_gflop": work,
        "inputs": list(inputs),
        "outputs": list(outputs),
    }
    if params is None and kind == "noop":
        params = {"n_outputs": len(outputs)}
    if params:
        d["params"] = params
    return d


def make_graph(components, graph, artifacts=None, name="wf"):
    if artifacts is None:
        names = []
        for c in components:
            for a in list(c["inputs"]) + list(c["outputs"]):
                if a not in names:
                    names.append(a)
        artifacts = [{"name": a, "size_bytes": 0, "initial": None} for a in names]
    return workflow_from_dict(
        {"name": name, "components": components, "artifacts": artifacts, "graph": graph}
    )


def T(cid):
    return {"op": "task", "component": cid}


def seq(*children):
    return {"op": "seq", "children": list(children)}


def par(*children):
    return {"op": "par", "children": list(children)}


def dumps(obj):
    return json.dumps(obj)
