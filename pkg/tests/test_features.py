from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from egcluster.event_graph import build_event_graph, components
from egcluster.features import (
    AggregatedGraph,
    activity,
    activity_from_counts,
    aggregate,
    clustering_coefficient,
    complete_vector,
    degree_imbalance,
    edge_density,
    embed,
    embed_all,
    feature_names,
    iet_entropy_from_values,
    motif_entropy,
    reciprocity,
    summary_stats,
)
from egcluster.motifs import MotifDistribution, enumerate_motifs
from egcluster.synthetic import planted_regimes, random_network

from conftest import make_net


def whole(net, dt=math.inf):
    return components(build_event_graph(net), dt, min_events=1).components[0]


def brute_clustering(n, edges):
    und = {frozenset(e) for e in edges if e[0] != e[1]}
    closed = triples = 0
    for centre in range(n):
        nbrs = [x for x in range(n) if frozenset((centre, x)) in und]
        for a, b in itertools.combinations(nbrs, 2):
            triples += 1
            closed += frozenset((a, b)) in und
    return closed / triples if triples else 0.0


def brute_reciprocity(edges):
    s = set(edges)
    return sum((v, u) in s for u, v in s) / len(s)


def test_aggregate_collapses_and_keeps_direction(three_events):
    g = aggregate(whole(make_net([("a", "b", 1), ("a", "b", 2), ("b", "a", 3)])))
    assert g.n_edges == 2 and g.n_nodes == 2
    g = aggregate(whole(three_events))
    labels = whole(three_events).network.node_labels
    assert {(labels[g.node_ids[u]], labels[g.node_ids[v]]) for u, v in g.edges.tolist()} == {("a", "b"), ("b", "c")}


def test_inward_star():
    g = AggregatedGraph.from_edges([(1, 0), (2, 0), (3, 0)])
    assert degree_imbalance(g, "out", "in") == (-1.0, 0.0)
    assert degree_imbalance(g, "out", "out") == (1.0, 1.0)
    assert degree_imbalance(g, "in", "out")[0] == 0.0


def test_imbalance_all_equal_is_zero():
    g = AggregatedGraph.from_edges([(0, 1), (1, 0)])
    assert degree_imbalance(g, "in", "in") == (0.0, 0.5)
    with pytest.raises(ValueError):
        degree_imbalance(AggregatedGraph.from_edges([], 2), "in", "in")


def test_clustering_examples():
    assert clustering_coefficient(AggregatedGraph.from_edges([(0, 1), (1, 2), (2, 0)])) == 1.0
    assert clustering_coefficient(AggregatedGraph.from_edges([(0, 1), (1, 2)])) == 0.0
    # triangle with a pendant edge: one triangle over five connected triples
    tri_pendant = [(0, 1), (1, 2), (2, 0), (2, 3)]
    assert clustering_coefficient(AggregatedGraph.from_edges(tri_pendant)) == pytest.approx(0.6, abs=1e-15)
    # 4-cycle with one chord: two triangles over eight triples
    chord = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]
    assert clustering_coefficient(AggregatedGraph.from_edges(chord)) == 0.75 == brute_clustering(4, chord)


def test_reciprocity_examples():
    assert reciprocity(AggregatedGraph.from_edges([(0, 1), (1, 0)])) == 1.0
    assert reciprocity(AggregatedGraph.from_edges([(0, 1), (0, 2)])) == 0.0
    assert reciprocity(AggregatedGraph.from_edges([(0, 1), (1, 0), (0, 2)])) == pytest.approx(2 / 3, abs=1e-15)


def test_edge_density_examples():
    full = [(u, v) for u in range(3) for v in range(3) if u != v]
    assert edge_density(AggregatedGraph.from_edges(full)) == 1.0
    assert edge_density(AggregatedGraph.from_edges([(0, 1)])) == 0.5
    assert edge_density(AggregatedGraph.from_edges([(0, 1), (1, 2)])) == pytest.approx(1 / 3, abs=1e-15)
    with pytest.raises(ValueError):
        edge_density(AggregatedGraph(1, np.zeros((0, 2), np.int64)))


def test_activity_examples():
    lam, hat = activity_from_counts(10, 100.0)
    assert lam == 0.1 and hat == pytest.approx(0.0951625819640404, abs=1e-15)
    assert activity_from_counts(0, 5.0) == (0.0, 0.0)
    simultaneous = whole(make_net([("a", "b", 7), ("b", "c", 7)]))
    assert activity(simultaneous) == (2.0, pytest.approx(1 - math.exp(-2)))


BASE = [("a", "b", 0.0, "m"), ("b", "c", 3.0, "r"), ("c", "a", 4.0, "m"), ("a", "b", 9.0, "r"),
        ("b", "a", 10.0, "m")]


def shifted_copy(records, shift):
    return [(u + "'", v + "'", t + shift, c) for u, v, t, c in records]


def test_shifted_copy_has_identical_vector():
    one = whole(make_net(BASE, ["m", "r"]), 240)
    both = components(build_event_graph(make_net(BASE + shifted_copy(BASE, 1e5), ["m", "r"])), 240, 1)
    assert len(both) == 2
    for comp in both:
        np.testing.assert_array_equal(embed(comp).vector, embed(one).vector)


def test_complete_vector_of_back_to_back_copies():
    # the copy starts exactly when the original ends, so the joint rate is unchanged
    one = whole(make_net(BASE, ["m", "r"]), 240)
    g = build_event_graph(make_net(BASE + shifted_copy(BASE, 10.0), ["m", "r"]))
    np.testing.assert_allclose(complete_vector(g, 240).vector, embed(one).vector, rtol=0, atol=1e-15)


def test_summary_three_events(three_events):
    s = summary_stats(whole(three_events))
    assert (s.n_events, s.n_nodes, s.duration) == (3, 3, 4.0)
    assert s.edge_density == pytest.approx(2 / 6)


def test_motif_entropy_cases():
    labels = enumerate_motifs(["m", "r"])
    single = MotifDistribution.from_counts(labels, [5] + [0] * 23)
    assert motif_entropy(single, 2) == (0.0, 0.0)
    uniform = MotifDistribution.from_counts(labels, [2] * 24)
    assert motif_entropy(uniform, 2) == (math.log2(24), 1.0)
    half = MotifDistribution.from_counts(labels, [1, 1] + [0] * 22)
    s, s_hat = motif_entropy(half, 2)
    assert s == 1.0 and s_hat == pytest.approx(1 / math.log2(24))


def test_iet_entropy_cases():
    assert iet_entropy_from_values(np.full(7, 3.0), 10, 240) == (0.0, 0.0)
    uniform = np.arange(10) * 24.0 + 1.0
    assert iet_entropy_from_values(uniform, 10, 240) == (math.log2(10), 1.0)
    # the bin domain must put the two periods in different bins
    for short, long_, upper in [(2, 4, 10), (2, 200, 240)]:
        s, _ = iet_entropy_from_values(np.array([short, long_, short, long_], float), 10, upper)
        assert s == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        iet_entropy_from_values(np.zeros(0), 10, 240)
    with pytest.raises(ValueError):
        iet_entropy_from_values(np.ones(3), 1, 240)


def test_iet_entropy_infinite_dt_uses_max():
    s, _ = iet_entropy_from_values(np.array([1.0, 10.0]), 10, math.inf)
    assert s == 1.0


def test_vector_layout_and_norm(rng):
    net = planted_regimes(rng, n_slots=6)
    vecs = embed_all(components(build_event_graph(net), 240, 5))
    assert vecs and vecs[0].names == feature_names(["m", "r"])
    for v in vecs:
        assert v.dim == 32
        assert abs(np.linalg.norm(v.vector) - 1) <= 1e-12
        assert np.all((v.features >= 0) & (v.features <= 1))
        assert "edge_density" not in v.names


def test_embed_three_events_single_color(three_events):
    v = embed(whole(three_events, 3), c=1)
    assert v.dim == 14
    with pytest.raises(ValueError):
        embed(whole(three_events, 3), c=2)


def test_complete_vector_normalised(rng):
    g = build_event_graph(random_network(rng, 300, n_nodes=20))
    x = complete_vector(g, 240)
    assert abs(np.linalg.norm(x.vector) - 1) <= 1e-12


def directed_graphs(n):
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    for mask in range(1, 1 << len(pairs)):
        yield [p for i, p in enumerate(pairs) if mask >> i & 1]


@pytest.mark.parametrize("n", [2, 3])
def test_statistics_exhaustive_small(n):
    for edges in directed_graphs(n):
        g = AggregatedGraph.from_edges(edges, n)
        assert abs(clustering_coefficient(g) - brute_clustering(n, edges)) <= 1e-12
        assert abs(reciprocity(g) - brute_reciprocity(edges)) <= 1e-12
        assert abs(edge_density(g) - len(edges) / (n * (n - 1))) <= 1e-12


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=40))
def test_imbalance_in_out_zero(edges):
    edges = [e for e in edges if e[0] != e[1]]
    if not edges:
        return
    g = AggregatedGraph.from_edges(edges)
    assert abs(degree_imbalance(g, "in", "out")[0]) <= 1e-12
    for a in ("in", "out"):
        for b in ("in", "out"):
            mu, hat = degree_imbalance(g, a, b)
            assert -1 <= mu <= 1 and hat == (mu + 1) / 2


@given(st.integers(0, 2**32 - 1), st.integers(3, 40), st.integers(1, 200))
def test_dense_and_sparse_triangle_counts_agree(seed, n, m):
    from egcluster.features import _closed_and_triples

    r = np.random.default_rng(seed)
    g = AggregatedGraph.from_edges(r.integers(0, n, size=(m, 2)), n)
    assert _closed_and_triples(g, True) == _closed_and_triples(g, False)


def test_large_graph_paths_match_brute(rng):
    n = 400  # above the dense limit
    edges = {tuple(e) for e in rng.integers(0, n, size=(3000, 2)).tolist() if e[0] != e[1]}
    edges |= {(v, u) for u, v in list(edges)[:500]}
    g = AggregatedGraph.from_edges(sorted(edges), n)
    assert abs(reciprocity(g) - brute_reciprocity(sorted(edges))) <= 1e-12
    assert abs(clustering_coefficient(g) - brute_clustering(n, sorted(edges))) <= 1e-12
