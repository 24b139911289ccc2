"""Scale-invariant embedding of temporal components.

Vector layout for ``c`` colors (``6 * c**2 + 8`` entries):

    motif prevalences (canonical label order), motif entropy, IET entropy,
    imbalance (in,in), imbalance (out,in), imbalance (out,out),
    clustering, reciprocity, activity

Every entry is first mapped into ``[0, 1]``; the vector is then scaled to
unit Euclidean length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .event_graph import EventGraph, TemporalComponent, whole_graph_component
from .motifs import MotifDistribution, motif_distribution, motif_names

DEFAULT_N_BINS = 10
DURATION_FLOOR = 1.0

SCALAR_FEATURES = (
    "motif_entropy",
    "iet_entropy",
    "imbalance_in_in",
    "imbalance_out_in",
    "imbalance_out_out",
    "clustering",
    "reciprocity",
    "activity",
)
DESCRIPTORS = ("n_nodes", "n_events", "duration", "edge_density")


def feature_names(colors: Sequence[str]) -> list[str]:
    return motif_names(colors) + list(SCALAR_FEATURES)


@dataclass
class AggregatedGraph:
    """Binary directed static graph; ``edges`` holds local node indices."""

    n_nodes: int
    edges: np.ndarray  # shape (m, 2)
    node_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @classmethod
    def from_edges(cls, edges, n_nodes: int | None = None) -> "AggregatedGraph":
        """Build from ``(u, v)`` pairs of integer node ids; duplicates and
        self-loops are dropped."""
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        e = e[e[:, 0] != e[:, 1]]
        if len(e):
            e = np.unique(e, axis=0)
        if n_nodes is None:
            n_nodes = int(e.max()) + 1 if len(e) else 0
        return cls(n_nodes, e, np.arange(n_nodes, dtype=np.int64))

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.edges[:, 0], minlength=self.n_nodes)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.edges[:, 1], minlength=self.n_nodes)


def aggregate(component: TemporalComponent) -> AggregatedGraph:
    """Static graph with an edge ``u -> v`` iff some event ``(u, v, t)`` is in
    the component. Nodes are all participants of the component's events."""
    if component.n_events == 0:
        raise ValueError("empty component")
    net = component.network
    nodes = component.node_ids
    s = np.searchsorted(nodes, net.sources[component.event_ids])
    d = np.searchsorted(nodes, net.targets[component.event_ids])
    pairs = np.stack([s, d], axis=1)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if len(pairs):
        pairs = np.unique(pairs, axis=0)
    return AggregatedGraph(len(nodes), pairs, nodes)


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum()) + 0.0


def motif_entropy(dist: MotifDistribution, n_colors: int | None = None) -> tuple[float, float]:
    """Shannon entropy (bits) of the motif distribution and its value divided
    by ``log2(6 c^2)``."""
    if n_colors is None:
        n_motifs = len(dist.labels)
    else:
        n_motifs = 6 * n_colors * n_colors
    p = np.asarray(dist.prevalences, dtype=float)
    p = p[p > 0]
    # degenerate and uniform cases are pinned exactly rather than left to rounding
    if len(p) <= 1:
        return 0.0, 0.0
    if len(p) == n_motifs and np.all(p == p[0]):
        return math.log2(n_motifs), 1.0
    s = _entropy_bits(p)
    return s, s / math.log2(n_motifs)


def iet_histogram(iets: np.ndarray, n_bins: int, upper: float) -> np.ndarray:
    """Counts of ``iets`` in ``n_bins`` equal-width bins over ``[0, upper]``
    (last bin closed)."""
    iets = np.asarray(iets, dtype=float)
    if not math.isfinite(upper):
        upper = float(iets.max()) if len(iets) else 0.0
    if upper <= 0:
        counts = np.zeros(n_bins, dtype=np.int64)
        counts[0] = len(iets)
        return counts
    idx = np.floor(iets / upper * n_bins).astype(np.int64)
    idx = np.clip(idx, 0, n_bins - 1)
    return np.bincount(idx, minlength=n_bins)


def iet_entropy_from_values(iets: np.ndarray, n_bins: int, upper: float) -> tuple[float, float]:
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if len(iets) == 0:
        raise ValueError("no inter-event times; IET entropy undefined")
    counts = iet_histogram(iets, n_bins, upper)
    nz = counts[counts > 0]
    if len(nz) == 1:
        return 0.0, 0.0
    if len(nz) == n_bins and np.all(nz == nz[0]):
        return math.log2(n_bins), 1.0
    s = _entropy_bits(counts / counts.sum())
    return s, s / math.log2(n_bins)


def iet_entropy(component: TemporalComponent, n_bins: int = DEFAULT_N_BINS,
                delta_t: float | None = None) -> tuple[float, float]:
    """Entropy (bits) of the binned IET distribution over ``[0, delta_t]``,
    raw and divided by ``log2(n_bins)``.

    With an infinite ``delta_t`` the bins span ``[0, max iet]``.
    """
    if delta_t is None:
        delta_t = component.delta_t
    return iet_entropy_from_values(component.iets, n_bins, delta_t)


def degree_imbalance(graph: AggregatedGraph, alpha: str, beta: str) -> tuple[float, float]:
    """Mean source ``alpha``-degree minus target ``beta``-degree over edges,
    divided by the largest absolute difference; returns ``(mu, (mu+1)/2)``."""
    if graph.n_edges == 0:
        raise ValueError("graph has no edges; degree imbalance undefined")
    deg = {"in": graph.in_degree(), "out": graph.out_degree()}
    try:
        s = deg[alpha][graph.edges[:, 0]]
        t = deg[beta][graph.edges[:, 1]]
    except KeyError:
        raise ValueError("alpha and beta must be 'in' or 'out'") from None
    diff = s - t  # integers, so the (in,out) numerator cancels exactly
    largest = int(np.abs(diff).max())
    if largest == 0:
        mu = 0.0
    else:
        mu = float(diff.sum()) / (graph.n_edges * largest)
    return mu, (mu + 1.0) / 2.0


def _undirected_csr(graph: AggregatedGraph) -> sp.csr_matrix:
    n = graph.n_nodes
    e = graph.edges
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    a = sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(n, n))
    a.data[:] = 1  # reciprocal pairs collapse to a single undirected edge
    return a


#: graphs up to this many nodes use a dense adjacency matrix
DENSE_MAX_NODES = 256


def _closed_and_triples(graph: AggregatedGraph, dense: bool) -> tuple[int, int]:
    """Six times the triangle count and twice the connected-triple count."""
    e = graph.edges
    if dense:
        a = np.zeros((graph.n_nodes, graph.n_nodes), dtype=np.int64)
        a[e[:, 0], e[:, 1]] = 1
        a[e[:, 1], e[:, 0]] = 1
        k = a.sum(axis=1)
        return int(((a @ a) * a).sum()), int((k * (k - 1)).sum())
    a = _undirected_csr(graph)
    k = np.asarray(a.sum(axis=1)).ravel()
    return int((a @ a).multiply(a).sum()), int((k * (k - 1)).sum())


def clustering_coefficient(graph: AggregatedGraph) -> float:
    """Global transitivity of the undirected view: 3 x triangles / connected triples."""
    if graph.n_edges == 0 or graph.n_nodes < 3:
        return 0.0
    closed6, triples2 = _closed_and_triples(graph, graph.n_nodes <= DENSE_MAX_NODES)
    if triples2 == 0:
        return 0.0
    return closed6 / triples2


def reciprocity(graph: AggregatedGraph) -> float:
    """Fraction of directed edges whose reverse edge is also present."""
    if graph.n_edges == 0:
        raise ValueError("graph has no edges; reciprocity undefined")
    e = graph.edges
    n = max(graph.n_nodes, 1)
    if n <= DENSE_MAX_NODES:
        a = np.zeros((n, n), dtype=np.int64)
        a[e[:, 0], e[:, 1]] = 1
        return float(a[e[:, 1], e[:, 0]].sum()) / graph.n_edges
    fwd = e[:, 0] * n + e[:, 1]
    rev = e[:, 1] * n + e[:, 0]
    return float(np.isin(rev, fwd).sum()) / graph.n_edges


def edge_density(graph: AggregatedGraph) -> float:
    n = graph.n_nodes
    if n < 2:
        raise ValueError("edge density needs at least two nodes")
    return graph.n_edges / (n * (n - 1))


def activity_from_counts(n_events: int, duration: float,
                         floor: float = DURATION_FLOOR) -> tuple[float, float]:
    lam = n_events / max(duration, floor)
    return lam, -math.expm1(-lam)


def activity(component: TemporalComponent, floor: float = DURATION_FLOOR) -> tuple[float, float]:
    """Events per second (duration clamped below at ``floor``) and ``1 - exp(-rate)``."""
    return activity_from_counts(component.n_events, component.duration, floor)


@dataclass
class ComponentSummary:
    n_nodes: int
    n_events: int
    duration: float
    edge_density: float

    def as_tuple(self) -> tuple:
        return (self.n_nodes, self.n_events, self.duration, self.edge_density)


def summary_stats(component: TemporalComponent, graph: AggregatedGraph | None = None) -> ComponentSummary:
    if graph is None:
        graph = aggregate(component)
    rho = edge_density(graph) if graph.n_nodes >= 2 else 0.0
    return ComponentSummary(
        n_nodes=int(len(component.node_ids)),
        n_events=component.n_events,
        duration=component.duration,
        edge_density=rho,
    )


@dataclass
class FeatureVector:
    """Embedding of one component.

    ``features`` are the per-feature values mapped into ``[0, 1]``; ``vector``
    is ``features`` scaled to unit length; ``raw`` keeps the untransformed
    statistics (entropies in bits, imbalances in ``[-1, 1]``, activity in
    events per second).
    """

    names: list[str]
    features: np.ndarray
    vector: np.ndarray
    raw: np.ndarray
    summary: ComponentSummary | None = None
    component_id: int = -1

    @property
    def dim(self) -> int:
        return len(self.vector)

    def __len__(self) -> int:
        return len(self.vector)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.vector.tolist()))


def embed_parts(component: TemporalComponent, n_bins: int = DEFAULT_N_BINS,
                delta_t: float | None = None) -> FeatureVector:
    """Compute all features of a component and assemble the unit vector."""
    if component.n_edges == 0:
        raise ValueError("component has no edges; cannot embed")
    net = component.network
    c = net.n_colors
    if delta_t is None:
        delta_t = component.delta_t

    dist = motif_distribution(component)
    s_mot, s_mot_n = motif_entropy(dist, c)
    s_iet, s_iet_n = iet_entropy(component, n_bins, delta_t)
    agg = aggregate(component)
    if agg.n_edges:
        mu_ii, mu_ii_n = degree_imbalance(agg, "in", "in")
        mu_oi, mu_oi_n = degree_imbalance(agg, "out", "in")
        mu_oo, mu_oo_n = degree_imbalance(agg, "out", "out")
        rec = reciprocity(agg)
    else:  # only self-loop events; nothing to aggregate
        mu_ii = mu_oi = mu_oo = rec = 0.0
        mu_ii_n = mu_oi_n = mu_oo_n = 0.5
    clus = clustering_coefficient(agg)
    lam, lam_n = activity(component)

    prev = dist.prevalences.astype(float)
    features = np.concatenate(
        [prev, [s_mot_n, s_iet_n, mu_ii_n, mu_oi_n, mu_oo_n, clus, rec, lam_n]]
    )
    raw = np.concatenate([prev, [s_mot, s_iet, mu_ii, mu_oi, mu_oo, clus, rec, lam]])
    norm = np.linalg.norm(features)
    if norm == 0:
        raise ValueError("feature vector is zero; cannot normalise")
    return FeatureVector(
        names=feature_names(net.color_labels),
        features=features,
        vector=features / norm,
        raw=raw,
        summary=summary_stats(component, agg),
        component_id=component.id,
    )


def embed(component: TemporalComponent, c: int | None = None, n_bins: int = DEFAULT_N_BINS,
          delta_t: float | None = None) -> FeatureVector:
    """Unit-length feature vector of ``component``.

    ``c`` is accepted for interface symmetry; the color count always comes
    from the component's network so that labels and layout agree.
    """
    if c is not None and c != component.network.n_colors:
        raise ValueError(f"color count {c} does not match network ({component.network.n_colors})")
    return embed_parts(component, n_bins, delta_t)


def complete_vector(graph: EventGraph, delta_t: float, n_bins: int = DEFAULT_N_BINS) -> FeatureVector:
    """Embedding of the whole network treated as a single component."""
    if graph.n_events == 0:
        raise ValueError("empty event graph")
    return embed_parts(whole_graph_component(graph, delta_t), n_bins, delta_t)


def embed_all(comps, n_bins: int = DEFAULT_N_BINS, delta_t: float | None = None) -> list[FeatureVector]:
    """Embed every component that has at least one edge, in input order."""
    return [embed_parts(comp, n_bins, delta_t) for comp in comps if comp.n_edges > 0]


def feature_matrix(vectors: Sequence[FeatureVector], which: str = "vector") -> np.ndarray:
    if not vectors:
        return np.zeros((0, 0))
    return np.vstack([getattr(v, which) for v in vectors])
