"""
Browsing the testbed catalog
============================

Load the bundled two-site testbed, count nodes per cluster and ask which
machines can host a given piece of software.
"""

from gridvpe import load_testbed, query_nodes, transfer_time

catalog = load_testbed()

###############################################################################
# Clusters and their sizes
for cid, cl in sorted(catalog.clusters.items()):
    node = catalog.node(cl.node_ids[0])
    print(f"{cid:11s} {len(cl.node_ids):4d} nodes x {node.cores} cores @ {node.clock_ghz} GHz  {sorted(node.software)}")
print("total cores:", catalog.total_cores)

###############################################################################
# Capability queries return nodes sorted by id
servers = query_nodes(catalog, {"UNICORE server"})
print(len(servers), "nodes run a UNICORE server, e.g.", [n.id for n in servers[:3]])

fast_cast = query_nodes(catalog, {"CAST"}, min_clock_ghz=1.5)
print("CAST on >= 1.5 GHz:", fast_cast[0].id, "...", fast_cast[-1].id)

###############################################################################
# Moving 100 MB inside a cluster, within a site and across sites
for src, dst in [("nina-01", "nina-02"), ("pf-01", "nina-01"), ("nina-01", "i-cluster2-001")]:
    print(f"{src} -> {dst}: {transfer_time(catalog, src, dst, 10**8):.4f} s")
