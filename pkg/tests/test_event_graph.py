from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from hypothesis import given
from hypothesis import strategies as st

from egcluster.event_graph import (
    OutOfOrderError,
    StreamingEventGraph,
    UnionFind,
    build_event_graph,
    build_streaming,
    components,
    dt_scan,
    static_components,
    threshold,
)
from egcluster.motifs import ABAB, ABBC, ABCA
from egcluster.synthetic import random_network

from conftest import make_net


def naive_edges(net):
    """For every node, link each event to the next event touching it."""
    edges = set()
    for x in range(net.n_nodes):
        touching = [i for i in range(net.n_events) if x in (net.sources[i], net.targets[i])]
        edges.update(zip(touching, touching[1:]))
    return edges


def test_three_event_example(three_events):
    g = build_event_graph(three_events)
    got = {(p, s): (w, b) for p, s, w, b in zip(g.pred.tolist(), g.succ.tolist(), g.iet.tolist(), g.base.tolist())}
    assert got == {(0, 1): (2.0, ABBC), (1, 2): (2.0, ABCA), (0, 2): (4.0, ABAB)}


def test_edges_sorted_by_successor(three_events):
    g = build_event_graph(three_events)
    assert list(zip(g.succ.tolist(), g.pred.tolist())) == sorted(zip(g.succ.tolist(), g.pred.tolist()))


def test_repeated_pair_deduplicated():
    g = build_event_graph(make_net([("a", "b", 1), ("a", "b", 2), ("a", "b", 3)]))
    assert g.edges() == [(0, 1), (1, 2)]


def test_streaming_matches_batch(three_events):
    assert build_streaming(three_events) == build_event_graph(three_events)


def test_streaming_rejects_disorder():
    sg = StreamingEventGraph()
    sg.push("a", "b", 5)
    with pytest.raises(OutOfOrderError):
        sg.push("b", "c", 4)


def test_streaming_lateness_reorders():
    events = [("a", "b", 2.0), ("b", "c", 1.0), ("c", "d", 3.0), ("a", "d", 2.5)]
    g = build_streaming(events, lateness=2.0)
    ref = build_event_graph(make_net(events))
    assert g.edge_set() == ref.edge_set()
    assert g.network.records() == ref.network.records()


def test_streaming_lateness_window_enforced():
    sg = StreamingEventGraph(lateness=1.0)
    for t in (1.0, 5.0):
        sg.push("a", "b", t)
    with pytest.raises(OutOfOrderError):
        sg.push("a", "c", 2.0)


def test_threshold_example(three_events):
    g = build_event_graph(three_events)
    kept = threshold(g, 3)
    assert {g.edges()[i] for i in kept} == {(0, 1), (1, 2)}
    with pytest.raises(ValueError):
        threshold(g, 0)


def test_components_examples(three_events):
    g = build_event_graph(three_events)
    d = components(g, 3, min_events=1)
    assert len(d) == 1 and d.components[0].n_events == 3
    d = components(g, 1, min_events=1)
    assert [c.n_events for c in d] == [1, 1, 1]


def test_min_events_residual(three_events):
    d = components(build_event_graph(three_events), 1, min_events=2)
    assert len(d) == 0
    assert d.residual_components == 3 and d.residual_events == 3


def test_component_timings(three_events):
    c = components(build_event_graph(three_events), 3, min_events=1).components[0]
    assert (c.start, c.end, c.duration) == (1.0, 5.0, 4.0)
    assert sorted(c.iets.tolist()) == [2.0, 2.0]


def test_dt_scan_example(three_events):
    rows = dt_scan(build_event_graph(three_events), [1, 3, math.inf])
    assert [r["largest_component"] for r in rows] == [1, 3, 3]
    assert [r["n_components"] for r in rows] == [3, 1, 1]


def test_dt_scan_rejects_unsorted(three_events):
    with pytest.raises(ValueError):
        dt_scan(build_event_graph(three_events), [3, 1])


def test_union_find():
    uf = UnionFind(5)
    uf.union(0, 1)
    uf.union(3, 4)
    uf.union(1, 4)
    assert uf.n_sets == 2
    assert uf.find(0) == uf.find(3) and uf.find(2) != uf.find(0)


def test_empty_network():
    g = build_event_graph(make_net([]))
    assert g.n_edges == 0 and len(components(g, 10, 1)) == 0


@given(st.integers(0, 2**32 - 1), st.integers(1, 120))
def test_batch_matches_naive_and_streaming(seed, n):
    net = random_network(np.random.default_rng(seed), n)
    g = build_event_graph(net)
    assert g.edge_set() == naive_edges(net)
    assert build_streaming(net).edge_set() == g.edge_set()
    assert np.all(g.pred < g.succ)
    assert g.in_degree().max(initial=0) <= 2 and g.out_degree().max(initial=0) <= 2
    assert np.all(g.iet == net.times[g.succ] - net.times[g.pred])


@given(st.integers(0, 2**32 - 1), st.integers(1, 150), st.floats(0.5, 50))
def test_components_match_scipy(seed, n, dt):
    net = random_network(np.random.default_rng(seed), n)
    g = build_event_graph(net)
    kept = threshold(g, dt)
    adj = sp.coo_matrix((np.ones(len(kept)), (g.pred[kept], g.succ[kept])), shape=(n, n))
    n_cc, labels = connected_components(adj, directed=True, connection="weak")
    d = components(g, dt, min_events=1)
    assert len(d) == n_cc
    for c in d:
        assert len(set(labels[c.event_ids])) == 1
        assert np.all(g.iet[c.edge_ids] <= dt)
    sizes = [c.n_events for c in d]
    assert sizes == sorted(sizes, reverse=True)
    scan = dt_scan(g, [dt], min_events=1)[0]
    assert scan["n_components"] == n_cc and scan["largest_component"] == max(sizes)


@given(st.integers(0, 2**32 - 1), st.integers(1, 150))
def test_static_limit(seed, n):
    net = random_network(np.random.default_rng(seed), n)
    d = components(build_event_graph(net), math.inf, min_events=1)
    assert len(d) == len(static_components(net))


@given(st.lists(st.integers(0, 2**20), max_size=300), st.sampled_from([1, 2**8, 2**17, 2**33]))
def test_stable_argsort_ids(keys, scale):
    from egcluster.event_graph import _stable_argsort_ids

    k = np.array(keys, dtype=np.int64) * scale
    np.testing.assert_array_equal(_stable_argsort_ids(k), np.argsort(k, kind="stable"))


@given(st.integers(0, 2**32 - 1), st.integers(1, 200), st.sampled_from([1, 2, 3, 7, 64]))
def test_block_size_irrelevant(seed, n, block):
    net = random_network(np.random.default_rng(seed), n)
    assert build_event_graph(net, block=block) == build_event_graph(net)


def test_block_size_with_self_loops():
    net = make_net([("a", "a", 1), ("a", "b", 2), ("b", "b", 3), ("b", "a", 4), ("a", "a", 5)], allow_self_loops=True)
    ref = build_streaming(net, allow_self_loops=True)
    for block in (1, 2, 5):
        assert build_event_graph(net, block=block).edge_set() == ref.edge_set()
