"""Ward clustering of component embeddings and silhouette-based model selection."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .event_graph import UnionFind
from .motifs import BASES, collapse_colors

logger = logging.getLogger(__name__)


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        x = vectors
    else:
        rows = [getattr(v, "vector", v) for v in vectors]
        dims = {len(r) for r in rows}
        if len(dims) > 1:
            raise ValueError(f"vectors have different dimensions: {sorted(dims)}")
        x = np.asarray(rows, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2-d array of vectors")
    return np.asarray(x, dtype=float)


def pairwise_distances(vectors, chunk_size: int = 256) -> np.ndarray:
    """Euclidean distance matrix, filled ``chunk_size`` rows at a time."""
    x = _as_matrix(vectors)
    n = len(x)
    out = np.empty((n, n))
    for lo in range(0, n, chunk_size):
        hi = min(lo + chunk_size, n)
        diff = x[lo:hi, None, :] - x[None, :, :]
        out[lo:hi] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(out, 0.0)
    return out


@dataclass
class Dendrogram:
    """Merge tree. Row ``s`` of ``merges`` is ``(left, right, height, size)``.

    Leaves are ``0..n-1``; the cluster formed at step ``s`` gets id ``n + s``.
    Heights are Ward distances ``sqrt(2 |A||B| / (|A|+|B|)) * |c_A - c_B|``,
    i.e. square roots of the Lance-Williams values on squared distances.
    """

    n: int
    merges: np.ndarray

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in self.merges[:, :2]]

    def to_dict(self) -> dict:
        return {
            "n_leaves": self.n,
            "height": "ward distance (square root of Lance-Williams squared-distance value)",
            "merges": [
                {"left": int(a), "right": int(b), "height": float(h), "size": int(s)}
                for a, b, h, s in self.merges
            ],
        }


#: relative gap below which two merge costs count as tied
TIE_RTOL = 1e-12


def _closest_pair(d: np.ndarray, nnd: np.ndarray) -> tuple[int, int]:
    """Lexicographically smallest slot pair among the cheapest merges.

    Costs within ``TIE_RTOL`` of the minimum are treated as equal, so ties
    that rounding in the distance updates would split are still resolved
    by slot order.
    """
    m = float(nnd.min())
    limit = m + abs(m) * TIE_RTOL
    best = None
    for c in np.flatnonzero(nnd <= limit).tolist():
        p = int(np.flatnonzero(d[c] <= limit)[0])
        pair = (c, p) if c < p else (p, c)
        if best is None or pair < best:
            best = pair
    return best


def ward_linkage(dist: np.ndarray) -> Dendrogram:
    """Agglomerative Ward clustering from a Euclidean distance matrix.

    Uses the Lance-Williams update on squared distances with a cached nearest
    neighbour per active cluster. Clusters live in slots; merging slots
    ``a < b`` keeps the result in ``a``. Ties (up to :data:`TIE_RTOL`) go to
    the lexicographically smallest slot pair.
    """
    dist = np.asarray(dist, dtype=float)
    n = len(dist)
    if n < 2:
        raise ValueError("need at least two points to cluster")
    if dist.shape != (n, n):
        raise ValueError("distance matrix must be square")
    d = dist * dist
    np.fill_diagonal(d, np.inf)
    size = np.ones(n)
    ids = np.arange(n)
    active = np.ones(n, dtype=bool)
    nn = np.argmin(d, axis=1)
    nnd = d[np.arange(n), nn]
    merges = np.empty((n - 1, 4))

    for step in range(n - 1):
        a, b = _closest_pair(d, nnd)
        dab = d[a, b]
        na, nb = size[a], size[b]
        merges[step] = (min(ids[a], ids[b]), max(ids[a], ids[b]), math.sqrt(dab), na + nb)

        nk = size
        new = ((nk + na) * d[:, a] + (nk + nb) * d[:, b] - nk * dab) / (nk + na + nb)
        active[b] = False
        new[~active] = np.inf
        new[a] = np.inf
        d[a, :] = new
        d[:, a] = new
        d[b, :] = np.inf
        d[:, b] = np.inf
        size[a] = na + nb
        ids[a] = n + step
        nnd[b] = np.inf

        stale = active & ((nn == a) | (nn == b))
        stale[a] = True
        rows = np.flatnonzero(stale)
        if len(rows):
            sub = d[rows]
            nn[rows] = np.argmin(sub, axis=1)
            nnd[rows] = sub[np.arange(len(rows)), nn[rows]]
        closer = active & ~stale & ((new < nnd) | ((new == nnd) & (a < nn)))
        nn[closer] = a
        nnd[closer] = new[closer]
    return Dendrogram(n, merges)


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    k: int

    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.k)]


def _relabel(roots: np.ndarray) -> np.ndarray:
    """Map arbitrary labels to ``0..k-1`` in order of first appearance."""
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.ravel()]


def cut(dendrogram: Dendrogram, k: int) -> ClusterAssignment:
    """Flat clustering into ``k`` clusters by undoing the last ``k - 1`` merges.

    Cluster ids follow the order in which clusters first occur among leaves.
    """
    n = dendrogram.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    uf = UnionFind(n)
    rep = list(range(n)) + [0] * (n - 1)
    for s in range(n - k):
        left, right = int(dendrogram.merges[s, 0]), int(dendrogram.merges[s, 1])
        rep[n + s] = rep[left]
        uf.union(rep[left], rep[right])
    return ClusterAssignment(_relabel(uf.roots()), k)


@dataclass
class SilhouetteReport:
    scores: np.ndarray
    mean: float
    k: int
    variant: str = "centroid"


def _labels_of(assignment) -> np.ndarray:
    return np.asarray(getattr(assignment, "labels", assignment))


def silhouette(vectors, assignment, variant: str = "centroid") -> SilhouetteReport:
    """Per-sample silhouette scores and their mean.

    ``variant="centroid"`` compares each sample's distance to its own cluster
    centroid with the distance to the nearest other centroid.
    ``variant="classic"`` uses mean pairwise distances instead.
    """
    x = _as_matrix(vectors)
    labels = _labels_of(assignment)
    uniq = np.unique(labels)
    k = len(uniq)
    if k < 2:
        raise ValueError("silhouette needs at least two clusters")
    if len(labels) != len(x):
        raise ValueError("assignment does not match vectors")
    idx = np.searchsorted(uniq, labels)
    if variant == "centroid":
        centroids = np.vstack([x[idx == c].mean(axis=0) for c in range(k)])
        diff = x[:, None, :] - centroids[None, :, :]
        dc = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        intra = dc[np.arange(len(x)), idx]
        dc[np.arange(len(x)), idx] = np.inf
        inter = dc.min(axis=1)
    elif variant == "classic":
        dist = pairwise_distances(x)
        sums = np.zeros((len(x), k))
        np.add.at(sums.T, idx, dist)
        counts = np.bincount(idx, minlength=k).astype(float)
        own = counts[idx]
        intra = np.where(own > 1, sums[np.arange(len(x)), idx] / np.maximum(own - 1, 1), 0.0)
        means = sums / counts
        means[np.arange(len(x)), idx] = np.inf
        inter = means.min(axis=1)
        singleton = own == 1
    else:
        raise ValueError(f"unknown silhouette variant {variant!r}")
    denom = np.maximum(intra, inter)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(denom > 0, (inter - intra) / denom, 0.0)
    if variant == "classic":
        scores[singleton] = 0.0
    scores = np.clip(scores, -1.0, 1.0)
    return SilhouetteReport(scores, float(scores.mean()), k, variant)


@dataclass
class KSelection:
    best_k: int
    profile: dict[int, float]
    dendrogram: Dendrogram

    def rows(self) -> list[tuple[int, float]]:
        return sorted(self.profile.items())


def select_k(vectors, k_range: Iterable[int], dendrogram: Dendrogram | None = None,
             variant: str = "centroid") -> KSelection:
    """Cluster count maximising the mean silhouette of Ward cuts over ``k_range``.

    Ties go to the smaller ``k``.
    """
    x = _as_matrix(vectors)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("k_range is empty")
    n = len(x)
    if ks[0] < 2 or ks[-1] > n - 1:
        raise ValueError(f"k_range must lie within [2, {n - 1}]")
    if dendrogram is None:
        dendrogram = ward_linkage(pairwise_distances(x))
    profile = {}
    best_k, best = None, -math.inf
    for k in ks:
        score = silhouette(x, cut(dendrogram, k), variant).mean
        profile[k] = score
        if score > best:
            best_k, best = k, score
    return KSelection(best_k, profile, dendrogram)


def clip_k_range(k_range: Sequence[int], n: int) -> list[int]:
    """Restrict a requested k range to the admissible ``[2, n-1]``."""
    return [k for k in k_range if 2 <= k <= n - 1]


def cluster_profile(assignment, raw_features: np.ndarray, summaries: np.ndarray,
                    feature_names: Sequence[str], n_colors: int | None = None,
                    collapse: bool = False) -> list[dict]:
    """Per-cluster means of the descriptors and untransformed features.

    ``summaries`` rows are ``(n_nodes, n_events, duration, edge_density)``.
    With ``collapse`` the motif columns are summed over colors first, giving
    one column per base pattern.
    """
    labels = _labels_of(assignment)
    raw = np.asarray(raw_features, dtype=float)
    summ = np.asarray(summaries, dtype=float).reshape(len(labels), -1)
    names = list(feature_names)
    if collapse:
        if n_colors is None:
            raise ValueError("n_colors is required to collapse motif colors")
        n_mot = 6 * n_colors * n_colors
        motifs = collapse_colors(raw[:, :n_mot], n_colors)
        raw = np.hstack([motifs, raw[:, n_mot:]])
        names = [f"{b} Motif" for b in BASES] + names[n_mot:]
    out = []
    for c in np.unique(labels):
        sel = labels == c
        row = {"cluster": int(c), "n_components": int(sel.sum())}
        row.update(zip(("n_nodes", "n_events", "duration", "edge_density"), summ[sel].mean(axis=0).tolist()))
        row.update(zip(names, raw[sel].mean(axis=0).tolist()))
        out.append(row)
    return out


@dataclass
class ClusterVolumes:
    bin_starts: np.ndarray
    counts: np.ndarray  # (k, n_bins)
    residual: np.ndarray  # (n_bins,)
    totals: np.ndarray = field(init=False)

    def __post_init__(self):
        self.totals = self.counts.sum(axis=0) + self.residual

    @property
    def fractions(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.totals > 0, self.counts / np.maximum(self.totals, 1), 0.0)

    @property
    def residual_fraction(self) -> np.ndarray:
        return np.where(self.totals > 0, self.residual / np.maximum(self.totals, 1), 0.0)

    def rows(self) -> list[dict]:
        fr, rf = self.fractions, self.residual_fraction
        out = []
        for b, start in enumerate(self.bin_starts.tolist()):
            row = {"bin": b, "start": start, "n_events": int(self.totals[b])}
            row.update({f"cluster_{c}": float(fr[c, b]) for c in range(len(fr))})
            row["residual"] = float(rf[b])
            out.append(row)
        return out


def cluster_volumes(assignment, components, network, bin_width: float,
                    origin: float | None = None) -> ClusterVolumes:
    """Fraction of all events per time bin that belong to each cluster.

    Events outside the clustered ``components`` (small or unembedded
    components) form the residual series.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    labels = _labels_of(assignment)
    times = network.times
    k = int(labels.max()) + 1 if len(labels) else 0
    if len(times) == 0:
        return ClusterVolumes(np.zeros(0), np.zeros((k, 0), dtype=np.int64), np.zeros(0, dtype=np.int64))
    t0 = float(times[0]) if origin is None else float(origin)
    bins = np.floor((times - t0) / bin_width).astype(np.int64)
    if bins.min() < 0:
        raise ValueError("origin is after the first event")
    n_bins = int(bins.max()) + 1
    event_cluster = np.full(len(times), -1, dtype=np.int64)
    for comp, lab in zip(components, labels):
        event_cluster[comp.event_ids] = lab
    counts = np.zeros((k, n_bins), dtype=np.int64)
    for c in range(k):
        counts[c] = np.bincount(bins[event_cluster == c], minlength=n_bins)
    residual = np.bincount(bins[event_cluster < 0], minlength=n_bins)
    starts = t0 + bin_width * np.arange(n_bins)
    return ClusterVolumes(starts, counts, residual)
