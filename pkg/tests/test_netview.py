import networkx as nx
import numpy as np
import pytest

from satroute.constellation import ConstellationConfig, ContractViolation
from satroute.netview import (
    UNREACHABLE, HopFieldCache, Topology, TopologySnapshot, apply_failure_events, diameter, hop_field,
)


@pytest.fixture
def topo():
    return Topology(ConstellationConfig(4, 6, 500, 60))


def test_edge_count(topo):
    assert topo.n_edges == 2 * 24


def test_reverse_direction(topo):
    for u in range(24):
        for j in range(4):
            v = topo.neighbors[u, j]
            assert topo.neighbors[v, topo.reverse_direction(u, j)] == u


def test_fault_free_hops_equal_torus_distance(topo):
    snap = TopologySnapshot.fault_free(topo)
    hf = hop_field(snap, 0)
    P, S = 4, 6
    for u in range(24):
        p, s = divmod(u, S)
        expect = min(p, P - p) + min(s, S - s)
        assert hf.hops[u] == expect
    assert hf.hops.max() == diameter(topo.config) == 2 + 3


def test_hops_match_networkx_under_failures(topo):
    rng = np.random.default_rng(4)
    snap = TopologySnapshot.fault_free(topo)
    events = [(int(k), False) for k in rng.choice(topo.n_edges, 12, replace=False)]
    snap = apply_failure_events(snap, events, 1.0)
    g = nx.Graph()
    g.add_nodes_from(range(24))
    g.add_edges_from(topo.edges[snap.live].tolist())
    for dest in (0, 7, 23):
        hf = hop_field(snap, dest)
        ref = nx.single_source_shortest_path_length(g, dest)
        for u in range(24):
            assert hf.hops[u] == ref.get(u, UNREACHABLE)


def test_snapshot_versioning(topo):
    snap = TopologySnapshot.fault_free(topo)
    assert apply_failure_events(snap, []) is snap
    assert apply_failure_events(snap, [(0, True)]) is snap  # no change
    s1 = apply_failure_events(snap, [((0, 1), False)], 0.25)
    assert s1.version == 1 and not s1.live[topo.edge_id(0, 1)]
    dl = s1.direction_live()
    assert not dl[0, 0] and not dl[1, 1]
    with pytest.raises(ContractViolation):
        apply_failure_events(snap, [(10_000, False)])
    with pytest.raises(ContractViolation):
        apply_failure_events(snap, [((0, 13), False)])


def test_isolated_node_unreachable(topo):
    snap = TopologySnapshot.fault_free(topo)
    snap = apply_failure_events(snap, [(int(topo.edge_of[5, j]), False) for j in range(4)])
    assert hop_field(snap, 0).hops[5] == UNREACHABLE


def test_cache_invalidates(topo):
    cache = HopFieldCache()
    snap = TopologySnapshot.fault_free(topo)
    a = cache.get(snap, 3)
    assert cache.get(snap, 3) is a
    s1 = apply_failure_events(snap, [(0, False)])
    assert cache.get(s1, 3).version == 1
