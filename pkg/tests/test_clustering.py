from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.cluster.hierarchy import linkage

from egcluster.clustering import (
    ClusterAssignment,
    cluster_profile,
    cluster_volumes,
    cut,
    pairwise_distances,
    select_k,
    silhouette,
    ward_linkage,
)

from conftest import make_net


def naive_ward(x, exact=False):
    """Merge the pair with the smallest increase in within-cluster sum of
    squares, recomputed from member points at every step.

    Clusters sit in slots (the smallest member leaf); ties go to the
    lexicographically smallest slot pair. Returns merged id pairs and heights.
    With ``exact`` the costs are rationals, so ties are true ties.
    """
    if exact:
        x = np.array([[Fraction(int(v)) for v in row] for row in x], dtype=object)
    n = len(x)
    members = {i: [i] for i in range(n)}
    ids = {i: i for i in range(n)}
    out = []
    for step in range(n - 1):
        best = None
        for a, b in itertools.combinations(sorted(members), 2):
            pa, pb = x[members[a]], x[members[b]]
            na, nb = len(pa), len(pb)
            gap = pa.mean(axis=0) - pb.mean(axis=0)
            w = Fraction(na * nb, na + nb) if exact else na * nb / (na + nb)
            cost = w * (gap @ gap)
            if best is None or cost < best[0]:
                best = (cost, a, b)
        cost, a, b = best
        out.append((min(ids[a], ids[b]), max(ids[a], ids[b]), np.sqrt(float(2 * cost))))
        members[a] += members.pop(b)
        ids[a] = n + step
        del ids[b]
    return out


def brute_silhouette(x, labels):
    """Classic per-sample silhouette from mean pairwise distances."""
    d = pairwise_distances(x)
    out = []
    for i, li in enumerate(labels):
        own = [j for j in range(len(x)) if labels[j] == li and j != i]
        if not own:
            out.append(0.0)
            continue
        a = np.mean(d[i, own])
        b = min(np.mean(d[i, labels == c]) for c in set(labels.tolist()) if c != li)
        out.append((b - a) / max(a, b))
    return np.array(out)


def test_distance_examples():
    d = pairwise_distances(np.array([[0.0, 0.0], [1.0, 1.0]]))
    assert d[0, 1] == d[1, 0] == np.sqrt(2) and d[0, 0] == 0


def test_three_collinear_points():
    dg = ward_linkage(pairwise_distances(np.array([[0.0], [1.0], [10.0]])))
    assert dg.pairs() == [(0, 1), (2, 3)]
    assert dg.heights[0] == 1.0
    # Ward distance from {10} to {0, 1}: sqrt(2 * 1 * 2 / 3) * 9.5
    assert dg.heights[1] == pytest.approx(np.sqrt(4 / 3) * 9.5, rel=1e-15)
    assert cut(dg, 2).labels.tolist() == [0, 0, 1]


def test_cut_extremes():
    dg = ward_linkage(pairwise_distances(np.random.default_rng(0).normal(size=(6, 2))))
    assert cut(dg, 1).labels.tolist() == [0] * 6
    assert sorted(cut(dg, 6).labels.tolist()) == list(range(6))
    with pytest.raises(ValueError):
        cut(dg, 7)


def test_linkage_needs_two_points():
    with pytest.raises(ValueError):
        ward_linkage(np.zeros((1, 1)))


@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_ward_matches_naive(seed, n):
    x = np.random.default_rng(seed).normal(size=(n, 3))
    dg = ward_linkage(pairwise_distances(x))
    ref = naive_ward(x)
    assert dg.pairs() == [(a, b) for a, b, _ in ref]
    np.testing.assert_allclose(dg.heights, [h for _, _, h in ref], rtol=1e-9, atol=1e-12)
    assert np.all(np.diff(dg.heights) >= -1e-12)


def test_ward_matches_scipy(rng):
    x = rng.normal(size=(60, 5))
    ours = ward_linkage(pairwise_distances(x))
    theirs = linkage(x, method="ward")
    np.testing.assert_allclose(ours.heights, theirs[:, 2], rtol=1e-9)
    assert ours.merges[:, 3].tolist() == theirs[:, 3].tolist()


def test_silhouette_two_blobs(rng):
    x = np.vstack([rng.normal(0, 0.1, (20, 4)), rng.normal(5, 0.1, (20, 4))])
    labels = np.repeat([0, 1], 20)
    for variant in ("centroid", "classic"):
        assert silhouette(x, labels, variant).mean > 0.9


def test_silhouette_classic_matches_brute(rng):
    x = rng.normal(size=(25, 3))
    labels = rng.integers(0, 4, 25)
    labels[0] = 9  # singleton cluster
    rep = silhouette(x, labels, "classic")
    np.testing.assert_allclose(rep.scores, brute_silhouette(x, labels), atol=1e-12)


def test_silhouette_no_structure(rng):
    x = rng.normal(size=(200, 3))
    sel = select_k(x, [2, 3])
    assert max(sel.profile.values()) < 0.5


def test_silhouette_errors(rng):
    with pytest.raises(ValueError):
        silhouette(rng.normal(size=(4, 2)), np.zeros(4, int))
    with pytest.raises(ValueError):
        silhouette(rng.normal(size=(4, 2)), np.array([0, 1, 0, 1]), "median")


@given(st.integers(0, 2**32 - 1), st.integers(3, 30), st.integers(2, 5))
def test_silhouette_bounded(seed, n, k):
    r = np.random.default_rng(seed)
    x = r.integers(0, 3, size=(n, 2)).astype(float)  # many duplicate points
    labels = r.integers(0, k, n)
    if len(set(labels.tolist())) < 2:
        return
    for variant in ("centroid", "classic"):
        s = silhouette(x, labels, variant).scores
        assert np.all((s >= -1) & (s <= 1))


def test_select_k_finds_three_pairs():
    x = np.array([[0.0], [0.0], [10.0], [10.0], [20.0], [20.0]])
    sel = select_k(x, [2, 3, 4])
    assert sel.best_k == 3
    with pytest.raises(ValueError):
        select_k(x, [1, 2])
    with pytest.raises(ValueError):
        select_k(x, [6])


def test_profile_means():
    raw = np.array([[1.0, 0.0, 2.0], [3.0, 0.0, 4.0], [5.0, 1.0, 6.0]])
    summ = np.array([[2, 3, 10.0, 0.5], [4, 5, 20.0, 0.25], [6, 7, 30.0, 1.0]])
    rows = cluster_profile(ClusterAssignment(np.array([0, 0, 1]), 2), raw, summ, ["x", "y", "z"])
    assert rows[0] == {"cluster": 0, "n_components": 2, "n_nodes": 3.0, "n_events": 4.0,
                       "duration": 15.0, "edge_density": 0.375, "x": 2.0, "y": 0.0, "z": 3.0}
    assert rows[1]["x"] == 5.0


def test_profile_collapse_columns():
    raw = np.arange(2 * 32, dtype=float).reshape(2, 32)
    from egcluster.features import feature_names

    rows = cluster_profile(np.array([0, 1]), raw, np.ones((2, 4)), feature_names(["m", "r"]), 2, collapse=True)
    assert "ABCA Motif" in rows[0] and "ABmCAr" not in rows[0]
    assert rows[0]["ABAB Motif"] == 0 + 1 + 2 + 3


def test_volumes_alternate():
    # component 0 (cluster 0) in hour 0 and 2, component 1 (cluster 1) in hour 1
    from egcluster.event_graph import build_event_graph, components

    net = make_net([("a", "b", 0), ("b", "c", 10), ("x", "y", 3600), ("y", "z", 3610),
                    ("a", "b", 7200), ("b", "c", 7210)])
    comps = components(build_event_graph(net), 60, 1).components
    comps = sorted(comps, key=lambda c: c.start)
    labels = np.array([0, 1, 0])
    vol = cluster_volumes(labels, comps, net, 3600)
    assert vol.fractions.tolist() == [[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]
    assert vol.residual_fraction.tolist() == [0.0, 0.0, 0.0]


@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_ward_ties_follow_slot_order(seed, n):
    # small integer grids make many exactly tied merge costs
    x = np.random.default_rng(seed).integers(0, 3, size=(n, 2)).astype(float)
    assert ward_linkage(pairwise_distances(x)).pairs() == [(a, b) for a, b, _ in naive_ward(x, exact=True)]
