"""End-to-end orchestration: decomposition, embedding, clustering, reports.

Also hosts the comparison against fixed-width interval decompositions and
the PCA summary of the feature space.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import exports
from .clustering import (
    clip_k_range,
    cluster_profile,
    cluster_volumes,
    cut,
    pairwise_distances,
    select_k,
    ward_linkage,
)
from .event_graph import (
    Decomposition,
    EventGraph,
    TemporalComponent,
    UnionFind,
    build_event_graph,
    components,
    dt_scan,
    static_components,
)
from .events import TemporalNetwork, read_events, summarize
from .features import DEFAULT_N_BINS, FeatureVector, embed_all, feature_matrix
from .motifs import motif_distribution
from .null_models import ensemble_run

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

DEFAULT_DT_GRID = (1, 2, 5, 10, 20, 30, 60, 120, 180, 240, 300, 360, 480, 600, 900, 1200,
                   1800, 2400, 3600, math.inf)


@dataclass
class PipelineConfig:
    delta_t: float = 240.0
    min_events: int = 5
    n_bins: int = DEFAULT_N_BINS
    k_min: int = 2
    k_max: int = 30
    interval_width: float | None = None
    interval_offset: float = 0.0
    ensemble_size: int = 200
    run_ensemble: bool = False
    seed: int = 0
    threads: int = 1
    volume_bin: float = 3600.0
    barcode_window: float = 3600.0
    barcode_top: int = 10
    pca_components: int = 3
    silhouette_variant: str = "centroid"
    allow_self_loops: bool = False
    input: str | None = None
    input_format: str | None = None
    output_dir: str = "out"
    format: str = "csv"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.delta_t > 0:
            raise ValueError("delta_t must be positive")
        if self.min_events < 1:
            raise ValueError("min_events must be >= 1")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if not 2 <= self.k_min <= self.k_max:
            raise ValueError("k range must satisfy 2 <= k_min <= k_max")
        if self.interval_width is not None and not self.interval_width > 0:
            raise ValueError("interval_width must be positive")
        if self.ensemble_size < 2:
            raise ValueError("ensemble_size must be >= 2")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.silhouette_variant not in ("centroid", "classic"):
            raise ValueError("silhouette_variant must be centroid or classic")

    @property
    def k_range(self) -> range:
        return range(self.k_min, self.k_max + 1)

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        """Load a flat TOML document; keyword ``overrides`` that are not
        ``None`` win over file values."""
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls.from_mapping(data, **overrides)

    @classmethod
    def from_mapping(cls, data: dict, **overrides) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        values = dict(data)
        if "k_range" in values:
            lo, hi = values.pop("k_range")
            values.setdefault("k_min", lo)
            values.setdefault("k_max", hi)
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        return exports.sha256_text(json.dumps(exports._plain(d), sort_keys=True))


# -- intervals ---------------------------------------------------------------


@dataclass
class IntervalComponent:
    """Events of one fixed-width interval, optionally one static sub-component
    of that interval. ``component`` carries the induced event-graph edges."""

    interval: int
    sub_component: int | None
    component: TemporalComponent

    @property
    def event_ids(self) -> np.ndarray:
        return self.component.event_ids


def interval_index(times: np.ndarray, width: float, origin: float) -> np.ndarray:
    if math.isinf(width):
        return np.zeros(len(times), dtype=np.int64)
    return np.floor((np.asarray(times) - origin) / width).astype(np.int64)


def _units_from_labels(graph: EventGraph, labels: np.ndarray, delta_t: float) -> list[tuple[int, TemporalComponent]]:
    """Pseudo-components for each distinct label, keeping only event-graph
    edges whose endpoints share the label."""
    inside = labels[graph.pred] == labels[graph.succ]
    edge_ids = np.flatnonzero(inside)
    edge_labels = labels[graph.pred[edge_ids]]
    order = np.argsort(labels, kind="stable")
    uniq, starts = np.unique(labels[order], return_index=True)
    ev_groups = np.split(order, starts[1:])
    e_order = np.argsort(edge_labels, kind="stable")
    e_uniq, e_starts = np.unique(edge_labels[e_order], return_index=True)
    e_groups = dict(zip(e_uniq.tolist(), np.split(edge_ids[e_order], e_starts[1:])))
    empty = np.zeros(0, dtype=np.int64)
    return [
        (int(lab), TemporalComponent(graph, np.sort(g), np.sort(e_groups.get(int(lab), empty)), delta_t))
        for lab, g in zip(uniq.tolist(), ev_groups)
    ]


def interval_decompose(network: TemporalNetwork, width: float, sub_components: bool = False,
                       graph: EventGraph | None = None, offset: float = 0.0) -> list[IntervalComponent]:
    """Bin events into ``[t0 + k w, t0 + (k+1) w)`` with ``t0`` the first event
    time plus ``offset``; with ``sub_components`` split each interval into the
    weakly-connected components of its static aggregate.

    Each unit keeps the event-graph edges internal to it; edges that cross a
    unit boundary are dropped. IET bins for these units span ``[0, width]``.
    """
    if not width > 0:
        raise ValueError("width must be positive")
    if network.n_events == 0:
        return []
    if graph is None:
        graph = build_event_graph(network)
    origin = float(network.times[0]) - float(offset)
    if offset < 0:
        raise ValueError("offset must be non-negative")
    iv = interval_index(network.times, width, origin)
    unit_dt = width if math.isfinite(width) else math.inf

    if not sub_components:
        units = _units_from_labels(graph, iv, unit_dt)
        return [IntervalComponent(lab, None, comp) for lab, comp in units]

    # static components within each interval: union nodes of events per interval
    keys: dict[tuple[int, int], int] = {}
    s_idx = np.empty(network.n_events, dtype=np.int64)
    d_idx = np.empty(network.n_events, dtype=np.int64)
    for i, (k, u, v) in enumerate(zip(iv.tolist(), network.sources.tolist(), network.targets.tolist())):
        s_idx[i] = keys.setdefault((k, u), len(keys))
        d_idx[i] = keys.setdefault((k, v), len(keys))
    uf = UnionFind(len(keys))
    for a, b in zip(s_idx.tolist(), d_idx.tolist()):
        uf.union(a, b)
    roots = uf.roots()[s_idx]
    units = _units_from_labels(graph, roots, unit_dt)
    out = []
    per_interval: dict[int, int] = {}
    for _, comp in sorted(units, key=lambda u: int(u[1].event_ids[0])):
        k = int(iv[comp.event_ids[0]])
        sub = per_interval.get(k, 0)
        per_interval[k] = sub + 1
        out.append(IntervalComponent(k, sub, comp))
    out.sort(key=lambda u: (u.interval, u.sub_component))
    return out


def spanning_fraction(comps: Sequence[TemporalComponent], width: float, origin: float | None = None) -> float:
    """Fraction of components whose first and last events fall in different
    intervals of the given width."""
    if len(comps) == 0:
        raise ValueError("no components")
    if math.isinf(width):
        return 0.0
    if not width > 0:
        raise ValueError("width must be positive")
    if origin is None:
        origin = float(comps[0].network.times[0]) if comps[0].network.n_events else 0.0
    starts = np.array([c.start for c in comps])
    ends = np.array([c.end for c in comps])
    split = interval_index(starts, width, origin) != interval_index(ends, width, origin)
    return float(split.mean())


# -- PCA ---------------------------------------------------------------------


@dataclass
class PcaReport:
    explained_variance_ratio: np.ndarray
    loadings: np.ndarray  # (n_components, n_features), unit rows
    feature_names: list[str]
    top_features: list[list[tuple[str, float]]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "cumulative": np.cumsum(self.explained_variance_ratio).tolist(),
            "components": [
                {
                    "index": i,
                    "ratio": float(r),
                    "loadings": dict(zip(self.feature_names, self.loadings[i].tolist())),
                    "top": [{"feature": n, "loading": w} for n, w in self.top_features[i]],
                }
                for i, r in enumerate(self.explained_variance_ratio)
            ],
        }


def pca(features: np.ndarray, n_components: int | None = None,
        feature_names: Sequence[str] | None = None, top: int = 3) -> PcaReport:
    """Principal components of mean-centred data via SVD.

    Singular values below the numerical rank tolerance are zeroed, so null
    directions get ratio exactly 0. Each loading vector's sign is fixed so its
    largest-magnitude entry is positive.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("pca needs a 2-d matrix with at least two rows")
    n, d = x.shape
    if n_components is None:
        n_components = min(n, d)
    if not 1 <= n_components <= d:
        raise ValueError(f"n_components must be in [1, {d}]")
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(d)]
    xc = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(xc, full_matrices=True)
    tol = (s.max() if len(s) else 0.0) * max(n, d) * np.finfo(float).eps
    s = np.where(s > tol, s, 0.0)
    var = np.zeros(d)
    var[: len(s)] = s**2
    total = var.sum()
    ratios = var / total if total > 0 else np.zeros(d)
    load = vt[:n_components].copy()
    for row in load:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1
    tops = []
    for row in load:
        idx = np.argsort(-np.abs(row), kind="stable")[:top]
        tops.append([(names[j], float(row[j])) for j in idx])
    return PcaReport(ratios[:n_components], load, names, tops)


# -- comparison ------------------------------------------------------------


def _cluster_profile_for(vectors: list[FeatureVector], k_range: Sequence[int], variant: str) -> dict:
    ks = clip_k_range(k_range, len(vectors))
    if not ks:
        return {"n_units": len(vectors), "best_k": None, "best_silhouette": None, "profile": {}}
    sel = select_k(feature_matrix(vectors), ks, variant=variant)
    return {
        "n_units": len(vectors),
        "best_k": sel.best_k,
        "best_silhouette": sel.profile[sel.best_k],
        "profile": {str(k): v for k, v in sel.rows()},
    }


def mean_duration(decomp: Decomposition) -> float:
    if len(decomp) == 0:
        raise ValueError("no components")
    return float(np.mean([c.duration for c in decomp]))


def compare_decompositions(network: TemporalNetwork, config: PipelineConfig,
                           graph: EventGraph | None = None,
                           spanning_widths: Sequence[float] | None = None) -> dict:
    """Silhouette profiles of temporal components, whole fixed-width intervals,
    and static sub-components of intervals, plus spanning fractions."""
    if graph is None:
        graph = build_event_graph(network)
    decomp = components(graph, config.delta_t, config.min_events)
    temporal_vecs = embed_all(decomp, config.n_bins, config.delta_t)
    warnings: list[str] = []
    if not temporal_vecs:
        raise ValueError("no temporal components to compare")
    mat = feature_matrix(temporal_vecs)
    checksum_before = exports.sha256_text(mat.tobytes().hex())

    width = config.interval_width or mean_duration(decomp)
    span = float(network.times[-1] - network.times[0])
    if width >= span:
        warnings.append("interval width covers the whole span; interval decomposition is a single unit")

    def units_vectors(sub: bool):
        units = interval_decompose(network, width, sub_components=sub, graph=graph,
                                   offset=config.interval_offset)
        kept = [u.component for u in units if u.component.n_events >= config.min_events]
        return units, embed_all(kept, config.n_bins)

    iv_units, iv_vecs = units_vectors(False)
    sub_units, sub_vecs = units_vectors(True)

    results = {
        "temporal_components": _cluster_profile_for(temporal_vecs, config.k_range, config.silhouette_variant),
        "intervals": _cluster_profile_for(iv_vecs, config.k_range, config.silhouette_variant),
        "interval_sub_components": _cluster_profile_for(sub_vecs, config.k_range, config.silhouette_variant),
    }
    results["temporal_components"]["n_components"] = len(decomp)
    results["intervals"]["n_intervals"] = len(iv_units)
    results["interval_sub_components"]["n_sub_components"] = len(sub_units)
    for key in ("intervals", "interval_sub_components"):
        if results[key]["best_k"] is None:
            warnings.append(f"{key}: too few units to cluster")

    if spanning_widths is None:
        spanning_widths = (240.0, width, 1200.0)
    fractions = [
        {"width": float(w), "spanning_fraction": spanning_fraction(decomp.components, w)}
        for w in spanning_widths
    ]
    checksum_after = exports.sha256_text(feature_matrix(temporal_vecs).tobytes().hex())
    for w in warnings:
        logger.warning(w)
    return {
        "interval_width": width,
        "min_events_rule": "min_events applied to temporal components, intervals and sub-components alike",
        "decompositions": results,
        "spanning_fractions": fractions,
        "feature_checksum_before": checksum_before,
        "feature_checksum_after": checksum_after,
        "warnings": warnings,
    }


# -- barcode -----------------------------------------------------------------


def export_barcode(comps: Sequence[TemporalComponent], window: tuple[float, float],
                   top_n: int = 10) -> list[dict]:
    """Rows ``(rank, component_id, time)`` for the ``top_n`` components with
    most events inside ``[start, end)``; rank 1 has the most."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    start, end = window
    scored = []
    for c in comps:
        t = c.times
        inside = np.sort(t[(t >= start) & (t < end)])
        if len(inside):
            scored.append((-len(inside), c.id, inside))
    scored.sort(key=lambda s: (s[0], s[1]))
    rows = []
    for rank, (_, cid, inside) in enumerate(scored[:top_n], start=1):
        rows.extend({"rank": rank, "component_id": cid, "time": float(t)} for t in inside)
    return rows


# -- full run ----------------------------------------------------------------


@dataclass
class PipelineResult:
    network: TemporalNetwork
    graph: EventGraph
    decomposition: Decomposition
    vectors: list[FeatureVector]
    selection: Any = None
    assignment: Any = None
    artifacts: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def analyse(network: TemporalNetwork, config: PipelineConfig) -> PipelineResult:
    """Decompose, embed and cluster without touching the filesystem."""
    if network.n_events == 0:
        raise ValueError("empty network")
    graph = build_event_graph(network)
    decomp = components(graph, config.delta_t, config.min_events)
    vectors = embed_all(decomp, config.n_bins, config.delta_t)
    result = PipelineResult(network, graph, decomp, vectors)
    ks = clip_k_range(config.k_range, len(vectors))
    if not ks:
        msg = f"{len(vectors)} components cannot be clustered with k in {config.k_min}..{config.k_max}; clustering skipped"
        logger.warning(msg)
        result.warnings.append(msg)
        return result
    result.selection = select_k(feature_matrix(vectors), ks, variant=config.silhouette_variant)
    result.assignment = cut(result.selection.dendrogram, result.selection.best_k)
    return result


def run_pipeline(config: PipelineConfig, network: TemporalNetwork | None = None) -> PipelineResult:
    """Full run: read input, analyse, and write every artifact plus
    ``manifest.json`` into ``config.output_dir``."""
    if network is None:
        if config.input is None:
            raise ValueError("no input given")
        network = read_events(config.input, config.input_format, allow_self_loops=config.allow_self_loops)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    fmt = config.format
    res = analyse(network, config)
    art: dict[str, Path] = {}

    art["summary"] = exports.write_json(out / "summary.json", summarize(network))
    art["components"] = exports.write_json(
        out / "components.json",
        {
            "delta_t": config.delta_t,
            "min_events": config.min_events,
            "n_components": len(res.decomposition),
            "residual_components": res.decomposition.residual_components,
            "residual_events": res.decomposition.residual_events,
            "components": exports.component_records(res.decomposition),
        },
    )
    t0 = float(network.times[0])
    art["barcode"] = exports.write_table(
        out / "barcode",
        export_barcode(res.decomposition.components, (t0, t0 + config.barcode_window), config.barcode_top),
        ["rank", "component_id", "time"],
        fmt,
    )
    embedded = [c for c in res.decomposition if c.n_edges > 0]
    rows, cols = exports.motif_rows([(c.id, motif_distribution(c)) for c in embedded])
    art["motifs"] = exports.write_table(out / "motifs", rows, cols, fmt)
    rows, cols = exports.feature_rows(res.vectors)
    art["features"] = exports.write_table(out / "features", rows, cols, fmt)
    rows, cols = exports.feature_rows(res.vectors, "raw")
    art["features_raw"] = exports.write_table(out / "features_raw", rows, cols, fmt)
    art["dt_scan"] = exports.write_table(out / "dt_scan", dt_scan(res.graph, DEFAULT_DT_GRID, config.min_events), None, fmt)

    if res.selection is not None:
        sel, asg = res.selection, res.assignment
        art["dendrogram"] = exports.write_json(out / "dendrogram.json", sel.dendrogram.to_dict())
        art["silhouette"] = exports.write_table(
            out / "silhouette", [{"k": k, "mean_score": s} for k, s in sel.rows()], ["k", "mean_score"], fmt
        )
        art["assignments"] = exports.write_table(
            out / "assignments",
            [{"component_id": v.component_id, "cluster": int(l)} for v, l in zip(res.vectors, asg.labels)],
            ["component_id", "cluster"],
            fmt,
        )
        raw = feature_matrix(res.vectors, "raw")
        summ = np.array([v.summary.as_tuple() for v in res.vectors], dtype=float)
        names = res.vectors[0].names
        prof = cluster_profile(asg, raw, summ, names, network.n_colors, collapse=True)
        art["profile"] = exports.write_table(out / "profile", prof, None, fmt)
        comps_clustered = [c for c in embedded]
        labels = asg.labels
    else:
        comps_clustered, labels = [], np.zeros(0, dtype=np.int64)
    vol = cluster_volumes(labels, comps_clustered, network, config.volume_bin)
    art["volumes"] = exports.write_table(out / "volumes", vol.rows(), None, fmt)

    if len(res.vectors) >= 2:
        mat = feature_matrix(res.vectors)
        rep = pca(mat, min(config.pca_components, mat.shape[1]), res.vectors[0].names)
        art["pca"] = exports.write_json(out / "pca.json", rep.to_dict())

    if config.run_ensemble:
        ens = ensemble_run(network, config.ensemble_size, config.delta_t, config.min_events,
                           config.seed, config.n_bins, config.threads)
        art["ensemble"] = exports.write_json(out / "ensemble.json", ens.to_dict())

    manifest = {
        "config": config.to_dict() | {"output_dir": None},
        "config_hash": config.hash(),
        "seed": config.seed,
        "warnings": res.warnings,
        "artifacts": {
            name: {"path": p.name, "sha256": exports.sha256_file(p)} for name, p in sorted(art.items())
        },
    }
    exports.write_json(out / "manifest.json", manifest)
    res.artifacts = {k: str(v) for k, v in art.items()}
    return res
