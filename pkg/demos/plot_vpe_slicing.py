"""
Slicing the grid into private environments
==========================================

Two environments may share nodes. Each one keeps its own service
registry, and composite services expand into their leaves.
"""

from gridvpe import (
    ServiceBinding,
    VpeRegistry,
    create_vpe,
    load_testbed,
    load_vpe_spec,
    register_service,
    resolve_service,
    teardown_vpe,
)
from gridvpe.vpe import load_demo_vpe_spec

catalog = load_testbed()

###############################################################################
# The demo environment: two nina nodes and two pf nodes
aero = create_vpe(catalog, load_demo_vpe_spec())
print(aero.name, aero.resolved_nodes)
print([b.name for b in resolve_service(aero, "aeroelastic")])

###############################################################################
# A second environment overlapping nina-01
spec = load_vpe_spec('{"name": "side", "slices": [{"cluster": "nina", "node_ids": ["nina-01"]}]}')
side = register_service(create_vpe(catalog, spec), ServiceBinding("mapper", "field-map"))
print(side.name, side.resolved_nodes, side.service_names())

registry = VpeRegistry().add(aero).add(side)

###############################################################################
# Tearing one down leaves the other untouched
registry = teardown_vpe(registry, "side")
print("left:", list(registry.vpes), registry["aero-vpe"].resolved_nodes)
