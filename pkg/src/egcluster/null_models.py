"""Time-shuffled null models and the component-diversity z-score."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .event_graph import build_event_graph, components
from .events import TemporalNetwork
from .features import DEFAULT_N_BINS, FeatureVector, complete_vector, embed_all

logger = logging.getLogger(__name__)


@dataclass
class ShuffledReplicate:
    network: TemporalNetwork
    seed: int


def derive_seed(base_seed: int, index: int) -> int:
    """64-bit seed for replicate ``index``, hashed from ``(base_seed, index)``."""
    ss = np.random.SeedSequence([int(base_seed) & (2**64 - 1), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_seeds(base_seed: int, n: int) -> list[int]:
    seeds = [derive_seed(base_seed, i) for i in range(n)]
    if len(set(seeds)) != n:
        raise RuntimeError("seed derivation produced a collision")
    return seeds


def time_shuffle(network: TemporalNetwork, seed: int) -> ShuffledReplicate:
    """Randomly permute event times over the fixed (source, target, color)
    sequence. The result is re-sorted by time with ties in post-shuffle
    order, and re-indexed."""
    rng = np.random.default_rng(seed)
    times = network.times.copy()
    rng.shuffle(times)
    return ShuffledReplicate(network.with_times(times), int(seed))


def diversity(component_vectors: Sequence[FeatureVector] | np.ndarray,
              complete: FeatureVector | np.ndarray) -> float:
    """Mean Euclidean distance between component vectors and the complete vector."""
    x = np.asarray([getattr(v, "vector", v) for v in component_vectors], dtype=float)
    if len(x) == 0:
        raise ValueError("no component vectors")
    ref = np.asarray(getattr(complete, "vector", complete), dtype=float)
    if x.shape[1] != len(ref):
        raise ValueError("dimension mismatch between components and complete vector")
    return float(np.linalg.norm(x - ref, axis=1).mean())


@dataclass
class NetworkScore:
    """Diversity and decomposition summary for one network."""

    diversity: float | None
    n_components: int
    mean_events: float | None
    mean_duration: float | None

    def to_dict(self) -> dict:
        return {
            "diversity": self.diversity,
            "n_components": self.n_components,
            "mean_events": self.mean_events,
            "mean_duration": self.mean_duration,
        }


def score_network(network: TemporalNetwork, delta_t: float, min_events: int,
                  n_bins: int = DEFAULT_N_BINS) -> NetworkScore:
    graph = build_event_graph(network)
    decomp = components(graph, delta_t, min_events)
    vecs = embed_all(decomp, n_bins, delta_t)
    if not vecs:
        return NetworkScore(None, len(decomp), None, None)
    ref = complete_vector(graph, delta_t, n_bins)
    return NetworkScore(
        diversity=diversity(vecs, ref),
        n_components=len(decomp),
        mean_events=float(np.mean([c.n_events for c in decomp])),
        mean_duration=float(np.mean([c.duration for c in decomp])),
    )


def _replicate_job(args) -> dict:
    network, seed, delta_t, min_events, n_bins = args
    rep = time_shuffle(network, seed)
    out = score_network(rep.network, delta_t, min_events, n_bins).to_dict()
    out["seed"] = seed
    return out


@dataclass
class EnsembleStats:
    n_replicates: int
    replicates: list[dict]
    observed: NetworkScore
    mean: float
    std: float
    base_seed: int
    z: float | None = None
    z_defined: bool = False
    config: dict = field(default_factory=dict)

    @property
    def scores(self) -> np.ndarray:
        return np.array([r["diversity"] for r in self.replicates if r["diversity"] is not None])

    def to_dict(self) -> dict:
        reps = self.replicates

        def _mean(key):
            vals = [r[key] for r in reps if r[key] is not None]
            return float(np.mean(vals)) if vals else None

        return {
            "n_replicates": self.n_replicates,
            "base_seed": self.base_seed,
            "config": self.config,
            "observed": self.observed.to_dict(),
            "ensemble": {
                "mean_diversity": self.mean,
                "std_diversity": self.std,
                "mean_n_components": _mean("n_components"),
                "mean_events_per_component": _mean("mean_events"),
                "mean_component_duration": _mean("mean_duration"),
            },
            "z_score": self.z,
            "z_defined": self.z_defined,
            "replicates": reps,
        }


def ensemble_run(network: TemporalNetwork, n_replicates: int = 200, delta_t: float = 240.0,
                 min_events: int = 5, base_seed: int = 0, n_bins: int = DEFAULT_N_BINS,
                 workers: int = 1) -> EnsembleStats:
    """Score ``network`` against ``n_replicates`` time-shuffled replicates.

    The z-score uses the sample standard deviation of replicate diversities;
    it is undefined (``None``) when that deviation is zero. Replicates with no
    embeddable component are recorded but excluded from the statistics.
    """
    if n_replicates < 2:
        raise ValueError("n_replicates must be >= 2")
    seeds = derive_seeds(base_seed, n_replicates)
    jobs = [(network, s, delta_t, min_events, n_bins) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            replicates = list(pool.map(_replicate_job, jobs))
    else:
        replicates = [_replicate_job(j) for j in jobs]
    for i, r in enumerate(replicates):
        r["index"] = i

    observed = score_network(network, delta_t, min_events, n_bins)
    scores = np.array([r["diversity"] for r in replicates if r["diversity"] is not None])
    if len(scores) < 2:
        logger.warning("fewer than two replicates produced components; z-score undefined")
    mean = float(scores.mean()) if len(scores) else math.nan
    std = float(scores.std(ddof=1)) if len(scores) >= 2 else math.nan
    z, defined = None, False
    if observed.diversity is not None and len(scores) >= 2 and std > 0:
        z, defined = (observed.diversity - mean) / std, True
    return EnsembleStats(
        n_replicates=n_replicates,
        replicates=replicates,
        observed=observed,
        mean=mean,
        std=std,
        base_seed=base_seed,
        z=z,
        z_defined=defined,
        config={"delta_t": delta_t, "min_events": min_events, "n_bins": n_bins},
    )


def z_score(observed: float, mean: float, std: float) -> float | None:
    if not std > 0:
        return None
    return (observed - mean) / std
