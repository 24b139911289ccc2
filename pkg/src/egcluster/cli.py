"""Command-line interface.

Every subcommand reads an event file (CSV or JSONL), computes what it needs
and writes its artifact into ``--output-dir``. ``cluster`` and ``pca`` can
instead read a feature table written by ``features``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import exports
from .clustering import clip_k_range, cluster_profile, cluster_volumes, cut, select_k
from .event_graph import build_event_graph, components, dt_scan
from .events import read_events, serialize_events, summarize
from .features import embed_all, feature_matrix
from .motifs import motif_distribution
from .null_models import ensemble_run, score_network, time_shuffle
from .pipeline import (
    DEFAULT_DT_GRID,
    PipelineConfig,
    analyse,
    compare_decompositions,
    export_barcode,
    interval_decompose,
    mean_duration,
    pca,
    run_pipeline,
)

logger = logging.getLogger("egcluster")

COMMANDS = (
    "ingest", "build", "components", "scan-dt", "features", "cluster", "profile", "volumes",
    "shuffle-ensemble", "intervals", "compare", "pca", "barcode", "run", "synth",
)


def _float(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    S = argparse.SUPPRESS
    g.add_argument("--config", default=S, help="flat TOML file with pipeline settings")
    g.add_argument("--seed", type=int, default=S)
    g.add_argument("--output-dir", default=S)
    g.add_argument("--format", choices=("csv", "json"), default=S, help="format of tabular outputs")
    g.add_argument("--threads", type=int, default=S, help="worker processes for ensembles")
    g.add_argument("-v", "--verbose", action="store_true", default=S)
    return p


def _pipeline_opts(p: argparse.ArgumentParser, need_input: bool = True) -> None:
    if need_input:
        p.add_argument("input", help="event file (.csv or .jsonl)")
    p.add_argument("--input-format", choices=("csv", "jsonl"))
    p.add_argument("--delta-t", type=_float, help="edge threshold in seconds (default 240)")
    p.add_argument("--min-events", type=int, help="smallest component kept (default 5)")
    p.add_argument("--n-bins", type=int, help="IET entropy bins (default 10)")
    p.add_argument("--k-min", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--allow-self-loops", action="store_true", default=None)
    p.add_argument("--silhouette", dest="silhouette_variant", choices=("centroid", "classic"))


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="egcluster", description="Temporal component analysis of event streams.", parents=[common]
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help, inputs=True):
        p = sub.add_parser(name, help=help, parents=[common])
        _pipeline_opts(p, inputs)
        return p

    add("ingest", "validate an event file and write summary.json")
    add("build", "build the event graph and write its edge list")
    add("components", "write temporal components (JSON) and barcode data (CSV)")
    p = add("scan-dt", "component count and largest component across thresholds")
    p.add_argument("--grid", type=_float, nargs="+", help="ascending thresholds in seconds")
    add("features", "write motif distributions and the feature matrix")
    p = add("cluster", "Ward clustering with silhouette selection of k", inputs=False)
    p.add_argument("input", nargs="?", help="event file")
    p.add_argument("--features", help="feature table from the features command")
    p.add_argument("--k", type=int, help="cut at this k instead of the silhouette optimum")
    p = add("profile", "per-cluster feature means")
    p.add_argument("--no-collapse", action="store_true", help="keep colored motif columns")
    p = add("volumes", "cluster volumes over time")
    p.add_argument("--bin-width", type=_float, help="seconds per bin (default 3600)")
    p = add("shuffle-ensemble", "diversity z-score against time-shuffled replicates")
    p.add_argument("--replicates", type=int, help="ensemble size (default 200)")
    p.add_argument("--save-replicate-features", action="store_true")
    p = add("intervals", "fixed-width interval decomposition")
    p.add_argument("--width", type=_float, help="interval width (default: mean component duration)")
    p.add_argument("--sub-components", action="store_true")
    p.add_argument("--offset", type=float, help="shift of the interval origin before the first event")
    p = add("compare", "compare temporal components with interval decompositions")
    p.add_argument("--width", type=_float)
    p = add("pca", "principal components of the feature space", inputs=False)
    p.add_argument("input", nargs="?", help="event file")
    p.add_argument("--features", help="feature table from the features command")
    p.add_argument("--n-components", type=int)
    p = add("barcode", "event times of the largest components in a window")
    p.add_argument("--start", type=float, help="window start (default: first event)")
    p.add_argument("--end", type=float, help="window end (default: start + 1 hour)")
    p.add_argument("--top", type=int, default=10)
    p = add("run", "full pipeline with all exports and manifest.json")
    p.add_argument("--ensemble", action="store_true", help="also run the shuffled ensemble")
    p.add_argument("--replicates", type=int)
    p = sub.add_parser("synth", help="write a synthetic event file", parents=[common])
    p.add_argument("output", help="destination .csv or .jsonl")
    p.add_argument("--kind", choices=("regimes", "poisson", "straddling"), default="regimes")
    return parser


def make_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        "seed": getattr(args, "seed", None),
        "output_dir": getattr(args, "output_dir", None),
        "format": getattr(args, "format", None),
        "threads": getattr(args, "threads", None),
        "input": getattr(args, "input", None),
        "input_format": getattr(args, "input_format", None),
        "delta_t": getattr(args, "delta_t", None),
        "min_events": getattr(args, "min_events", None),
        "n_bins": getattr(args, "n_bins", None),
        "k_min": getattr(args, "k_min", None),
        "k_max": getattr(args, "k_max", None),
        "allow_self_loops": getattr(args, "allow_self_loops", None),
        "silhouette_variant": getattr(args, "silhouette_variant", None),
        "interval_width": getattr(args, "width", None),
        "interval_offset": getattr(args, "offset", None),
        "ensemble_size": getattr(args, "replicates", None),
        "volume_bin": getattr(args, "bin_width", None),
    }
    if getattr(args, "ensemble", False):
        overrides["run_ensemble"] = True
    config_path = getattr(args, "config", None)
    if config_path:
        return PipelineConfig.from_file(config_path, **overrides)
    return PipelineConfig.from_mapping({}, **overrides)


def _load(cfg: PipelineConfig):
    if cfg.input is None:
        raise SystemExit("error: an event file is required")
    return read_events(cfg.input, cfg.input_format, allow_self_loops=cfg.allow_self_loops)


def _emit(payload) -> None:
    sys.stdout.write(exports.dumps(payload))


def cmd_ingest(cfg, args):
    net = _load(cfg)
    summary = summarize(net)
    path = exports.write_json(Path(cfg.output_dir) / "summary.json", summary)
    _emit({"summary": str(path), **{k: summary[k] for k in ("n_events", "n_nodes", "color_fractions")}})


def cmd_build(cfg, args):
    g = build_event_graph(_load(cfg))
    codes = g.motif_codes()
    from .motifs import enumerate_motifs

    labels = [m.name for m in enumerate_motifs(g.network.color_labels)]
    rows = [
        {"pred": p, "succ": s, "iet": w, "motif": labels[c] if c >= 0 else ""}
        for p, s, w, c in zip(g.pred.tolist(), g.succ.tolist(), g.iet.tolist(), codes.tolist())
    ]
    path = exports.write_table(Path(cfg.output_dir) / "event_graph", rows, ["pred", "succ", "iet", "motif"], cfg.format)
    _emit({"event_graph": str(path), "n_events": g.n_events, "n_edges": g.n_edges})


def cmd_components(cfg, args):
    g = build_event_graph(_load(cfg))
    d = components(g, cfg.delta_t, cfg.min_events)
    out = Path(cfg.output_dir)
    p1 = exports.write_json(out / "components.json", {
        "delta_t": cfg.delta_t, "min_events": cfg.min_events, "n_components": len(d),
        "residual_components": d.residual_components, "residual_events": d.residual_events,
        "components": exports.component_records(d),
    })
    p2 = exports.write_table(out / "components_barcode", exports.barcode_rows(d), ["component_id", "time"], cfg.format)
    _emit({"components": str(p1), "barcode": str(p2), "n_components": len(d),
           "residual_components": d.residual_components})


def cmd_scan_dt(cfg, args):
    g = build_event_graph(_load(cfg))
    rows = dt_scan(g, args.grid or DEFAULT_DT_GRID, cfg.min_events)
    path = exports.write_table(Path(cfg.output_dir) / "dt_scan", rows, None, cfg.format)
    _emit({"dt_scan": str(path), "rows": rows})


def cmd_features(cfg, args):
    g = build_event_graph(_load(cfg))
    d = components(g, cfg.delta_t, cfg.min_events)
    vecs = embed_all(d, cfg.n_bins, cfg.delta_t)
    out = Path(cfg.output_dir)
    rows, cols = exports.motif_rows([(c.id, motif_distribution(c)) for c in d if c.n_edges > 0])
    p0 = exports.write_table(out / "motifs", rows, cols, cfg.format)
    rows, cols = exports.feature_rows(vecs)
    p1 = exports.write_table(out / "features", rows, cols, cfg.format)
    rows, cols = exports.feature_rows(vecs, "raw")
    p2 = exports.write_table(out / "features_raw", rows, cols, cfg.format)
    _emit({"motifs": str(p0), "features": str(p1), "features_raw": str(p2), "n_components": len(vecs)})


def _matrix_from(cfg, args):
    if getattr(args, "features", None):
        ids, x, names, _ = exports.read_feature_table(args.features)
        return ids, x, names
    vecs = analyse_vectors(cfg)
    return np.array([v.component_id for v in vecs]), feature_matrix(vecs), (vecs[0].names if vecs else [])


def analyse_vectors(cfg):
    g = build_event_graph(_load(cfg))
    return embed_all(components(g, cfg.delta_t, cfg.min_events), cfg.n_bins, cfg.delta_t)


def cmd_cluster(cfg, args):
    ids, x, _ = _matrix_from(cfg, args)
    ks = clip_k_range(cfg.k_range, len(x))
    if not ks:
        logger.warning("%d components: too few to cluster", len(x))
        _emit({"n_components": len(x), "clustered": False})
        return
    sel = select_k(x, ks, variant=cfg.silhouette_variant)
    k = args.k or sel.best_k
    asg = cut(sel.dendrogram, k)
    out = Path(cfg.output_dir)
    p1 = exports.write_json(out / "dendrogram.json", sel.dendrogram.to_dict())
    p2 = exports.write_table(out / "silhouette", [{"k": a, "mean_score": b} for a, b in sel.rows()],
                             ["k", "mean_score"], cfg.format)
    p3 = exports.write_table(out / "assignments",
                             [{"component_id": int(i), "cluster": int(l)} for i, l in zip(ids, asg.labels)],
                             ["component_id", "cluster"], cfg.format)
    _emit({"dendrogram": str(p1), "silhouette": str(p2), "assignments": str(p3),
           "best_k": sel.best_k, "k": k, "best_silhouette": sel.profile[sel.best_k]})


def cmd_profile(cfg, args):
    net = _load(cfg)
    res = analyse(net, cfg)
    if res.assignment is None:
        _emit({"clustered": False, "warnings": res.warnings})
        return
    raw = feature_matrix(res.vectors, "raw")
    summ = np.array([v.summary.as_tuple() for v in res.vectors], dtype=float)
    prof = cluster_profile(res.assignment, raw, summ, res.vectors[0].names, net.n_colors,
                           collapse=not args.no_collapse)
    path = exports.write_table(Path(cfg.output_dir) / "profile", prof, None, cfg.format)
    _emit({"profile": str(path), "k": res.assignment.k})


def cmd_volumes(cfg, args):
    net = _load(cfg)
    res = analyse(net, cfg)
    if res.assignment is None:
        comps, labels = [], np.zeros(0, dtype=np.int64)
    else:
        comps, labels = [c for c in res.decomposition if c.n_edges > 0], res.assignment.labels
    vol = cluster_volumes(labels, comps, net, cfg.volume_bin)
    path = exports.write_table(Path(cfg.output_dir) / "volumes", vol.rows(), None, cfg.format)
    _emit({"volumes": str(path), "n_bins": len(vol.bin_starts), "warnings": res.warnings})


def cmd_shuffle_ensemble(cfg, args):
    net = _load(cfg)
    ens = ensemble_run(net, cfg.ensemble_size, cfg.delta_t, cfg.min_events, cfg.seed, cfg.n_bins, cfg.threads)
    out = Path(cfg.output_dir)
    path = exports.write_json(out / "ensemble.json", ens.to_dict())
    if args.save_replicate_features:
        for r in ens.replicates:
            rep = time_shuffle(net, r["seed"]).network
            g = build_event_graph(rep)
            vecs = embed_all(components(g, cfg.delta_t, cfg.min_events), cfg.n_bins, cfg.delta_t)
            rows, cols = exports.feature_rows(vecs)
            exports.write_table(out / "replicates" / f"replicate_{r['index']:04d}_features", rows, cols, cfg.format)
    _emit({"ensemble": str(path), "observed": ens.observed.diversity, "mean": ens.mean, "std": ens.std,
           "z_score": ens.z})


def cmd_intervals(cfg, args):
    net = _load(cfg)
    g = build_event_graph(net)
    width = cfg.interval_width
    if width is None:
        width = mean_duration(components(g, cfg.delta_t, cfg.min_events))
    units = interval_decompose(net, width, args.sub_components, graph=g, offset=cfg.interval_offset)
    rows = []
    for u in units:
        c = u.component
        rows.append({"interval": u.interval, "sub_component": u.sub_component, "n_events": c.n_events,
                     "n_edges": c.n_edges, "start": c.start, "end": c.end})
    out = Path(cfg.output_dir)
    p1 = exports.write_table(out / "intervals", rows, ["interval", "sub_component", "n_events", "n_edges", "start", "end"], cfg.format)
    kept = [u.component for u in units if u.component.n_events >= cfg.min_events]
    for i, c in enumerate(kept):
        c.id = i
    vecs = embed_all(kept, cfg.n_bins)
    frows, cols = exports.feature_rows(vecs)
    p2 = exports.write_table(out / "interval_features", frows, cols, cfg.format)
    _emit({"intervals": str(p1), "features": str(p2), "width": width, "n_units": len(units)})


def cmd_compare(cfg, args):
    report = compare_decompositions(_load(cfg), cfg)
    path = exports.write_json(Path(cfg.output_dir) / "compare.json", report)
    _emit({"compare": str(path), **{k: {"best_k": v["best_k"], "best_silhouette": v["best_silhouette"]}
                                   for k, v in report["decompositions"].items()}})


def cmd_pca(cfg, args):
    _, x, names = _matrix_from(cfg, args)
    n = args.n_components or min(cfg.pca_components, x.shape[1] if x.ndim == 2 else 0)
    rep = pca(x, n, names)
    path = exports.write_json(Path(cfg.output_dir) / "pca.json", rep.to_dict())
    _emit({"pca": str(path), "explained_variance_ratio": rep.explained_variance_ratio.tolist(),
           "top": rep.top_features})


def cmd_barcode(cfg, args):
    net = _load(cfg)
    d = components(build_event_graph(net), cfg.delta_t, cfg.min_events)
    start = args.start if args.start is not None else (float(net.times[0]) if len(net) else 0.0)
    end = args.end if args.end is not None else start + 3600.0
    rows = export_barcode(d.components, (start, end), args.top)
    path = exports.write_table(Path(cfg.output_dir) / "barcode", rows, ["rank", "component_id", "time"], cfg.format)
    _emit({"barcode": str(path), "n_rows": len(rows)})


def cmd_run(cfg, args):
    res = run_pipeline(cfg)
    _emit({"artifacts": res.artifacts, "n_components": len(res.decomposition),
           "best_k": res.selection.best_k if res.selection else None, "warnings": res.warnings})


def cmd_synth(cfg, args):
    from . import synthetic

    rng = np.random.default_rng(cfg.seed)
    if args.kind == "regimes":
        net = synthetic.planted_regimes(rng)
    elif args.kind == "poisson":
        net = synthetic.poisson_network(rng, n_events=3000, n_nodes=300, rate=0.3)
    else:
        net = synthetic.straddling_bursts(rng)
    fmt = "jsonl" if args.output.endswith(".jsonl") else "csv"
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    Path(args.output).write_text(serialize_events(net, fmt), encoding="utf-8")
    _emit({"output": args.output, "n_events": net.n_events})


HANDLERS = {name: globals()["cmd_" + name.replace("-", "_")] for name in COMMANDS}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        HANDLERS[args.command](cfg, args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
