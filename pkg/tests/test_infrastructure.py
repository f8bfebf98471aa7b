import json

import pytest
from hypothesis import given, strategies as st

from gridvpe.errors import CatalogError
from gridvpe.infrastructure import (
    load_catalog,
    node_speed,
    query_nodes,
    transfer_time,
)
from helpers import cluster, link, make_catalog


def test_testbed_cluster_sizes(testbed):
    by_cluster = {}
    for n in testbed.nodes:
        by_cluster.setdefault(n.cluster_id, []).append(n)
    assert {k: len(v) for k, v in by_cluster.items()} == {
        "pf": 19,
        "nina": 16,
        "i-cluster2": 100,
        "shok": 1,
        "shik": 1,
        "shake": 1,
    }
    nina = by_cluster["nina"]
    assert nina[0].id == "nina-01" and nina[-1].id == "nina-16"
    assert all(n.cores == 2 and n.clock_ghz == 2.0 and n.software == {"CAST"} for n in nina)
    assert by_cluster["i-cluster2"][0].id == "i-cluster2-001"


def test_unicore_server_query(testbed):
    hits = query_nodes(testbed, {"UNICORE server"})
    assert {n.cluster_id for n in hits} == {"pf", "i-cluster2", "shok", "shik", "shake"}
    assert len(hits) == 19 + 100 + 3


def test_query_empty_and_nonexistent(testbed):
    assert query_nodes(testbed) == list(testbed.nodes)
    assert query_nodes(testbed, {"nonexistent"}) == []


def test_query_min_clock(testbed):
    fast = query_nodes(testbed, min_clock_ghz=1.0)
    assert {n.cluster_id for n in fast} == {"nina", "shok", "shik", "shake"}


def test_query_sorted_subset_and_core_sum(testbed):
    hits = query_nodes(testbed)
    assert [n.id for n in hits] == sorted(n.id for n in hits)
    assert sum(n.cores for n in hits) == testbed.total_cores == 19 * 2 + 16 * 2 + 100 * 2 + 3


def test_empty_catalog():
    with pytest.raises(CatalogError, match="empty catalog"):
        load_catalog('{"sites": [], "links": []}')


def test_duplicate_node_id():
    doc = {
        "sites": [
            {
                "id": "s",
                "clusters": [
                    dict(cluster("pf", 2), node_ids=["pf-01", "pf-02"]),
                    dict(cluster("other", 1), node_ids=["pf-01"]),
                ],
            }
        ]
    }
    with pytest.raises(CatalogError, match="duplicate id 'pf-01'"):
        load_catalog(json.dumps(doc))


def test_duplicate_cluster_id():
    with pytest.raises(CatalogError, match="duplicate id"):
        make_catalog({"s": [cluster("a"), cluster("a")]})


def test_dangling_link():
    with pytest.raises(CatalogError, match="dangling link endpoint 'mars'"):
        make_catalog({"s": [cluster("a")]}, [link("s", "mars")])


def test_syntax_error_position():
    with pytest.raises(CatalogError, match=r"line 2 column \d+"):
        load_catalog('{"sites":\n [,]}')


@pytest.mark.parametrize(
    "field, value",
    [("cores_per_node", 0), ("clock_ghz", 0.0), ("node_count", -1), ("clock_ghz", "fast")],
)
def test_invalid_cluster_fields(field, value):
    c = cluster("a")
    c[field] = value
    with pytest.raises(CatalogError):
        make_catalog({"s": [c]})


def test_node_speed_mapping(testbed):
    assert node_speed(testbed.node("nina-01")) == 2.0
    assert node_speed(testbed.node("i-cluster2-001")) == 0.9
    assert node_speed(make_catalog({"s": [cluster("h", clock=1.0)]}).node("h-01")) == 1.0


def test_node_speed_override():
    c = dict(cluster("g", clock=2.0), gflops_per_core=8.0)
    assert node_speed(make_catalog({"s": [c]}).node("g-01")) == 8.0


def test_transfer_same_node(testbed):
    assert transfer_time(testbed, "nina-01", "nina-01", 10**9) == 0.0


def test_transfer_formula():
    cat = make_catalog({"s": [cluster("a", 2, bw=1000.0, lat=0.5)]})
    assert transfer_time(cat, "a-01", "a-02", 10**8) == pytest.approx(0.8005, abs=1e-12)


def test_transfer_no_route():
    cat = make_catalog({"s1": [cluster("a")], "s2": [cluster("b")]})
    with pytest.raises(CatalogError, match="no route"):
        transfer_time(cat, "a-01", "b-01", 1)


def test_link_precedence_cluster_over_site():
    cat = make_catalog(
        {"s1": [cluster("a")], "s2": [cluster("b")]},
        [link("s1", "s2", bw=10.0, lat=100.0), link("b", "a", bw=1000.0, lat=1.0)],
    )
    # explicit cluster pair wins, and lookup is symmetric
    assert transfer_time(cat, "a-01", "b-01", 0) == pytest.approx(0.001)
    assert transfer_time(cat, "b-01", "a-01", 0) == pytest.approx(0.001)


def test_site_link_used_between_clusters(testbed):
    # pf and nina share the Sophia site link; nina -> i-cluster2 crosses sites
    assert transfer_time(testbed, "pf-01", "nina-01", 0) == pytest.approx(0.2e-3)
    assert transfer_time(testbed, "nina-01", "i-cluster2-001", 0) == pytest.approx(10e-3)


def test_round_trip(testbed):
    again = load_catalog(testbed.dumps())
    assert again == testbed
    assert again.nodes == testbed.nodes


@given(st.integers(0, 10**10), st.integers(0, 10**10))
def test_transfer_monotone_in_bytes(a, b):
    cat = make_catalog({"s": [cluster("a", 2, bw=100.0, lat=2.0)]})
    lo, hi = sorted((a, b))
    assert transfer_time(cat, "a-01", "a-02", lo) <= transfer_time(cat, "a-01", "a-02", hi)
    assert transfer_time(cat, "a-01", "a-02", 0) == pytest.approx(0.002)


@given(
    st.lists(
        st.tuples(st.integers(1, 12), st.integers(1, 4), st.sampled_from([0.5, 0.9, 2.0])),
        min_size=1,
        max_size=5,
    ),
    st.sets(st.sampled_from(["A", "B"])),
)
def test_query_properties(spec, need):
    clusters = [
        cluster(f"c{i}", count, cores, clock, software=["A"] if i % 2 else ["A", "B"])
        for i, (count, cores, clock) in enumerate(spec)
    ]
    cat = make_catalog({"s": clusters})
    hits = query_nodes(cat, need)
    assert [n.id for n in hits] == sorted(n.id for n in hits)
    assert set(hits) <= set(cat.nodes)
    assert all(need <= n.software for n in hits)
    assert sum(n.cores for n in query_nodes(cat)) == sum(c * k for k, c, _ in spec)
    assert load_catalog(cat.dumps()) == cat
