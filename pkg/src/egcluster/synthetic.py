"""Synthetic event streams with known structure, for tests and demos."""
from __future__ import annotations

import numpy as np

from .events import TemporalNetwork


def random_network(rng: np.random.Generator, n_events: int, n_nodes: int | None = None,
                   colors=("m", "r"), time_scale: float = 10.0,
                   integer_times: bool = True) -> TemporalNetwork:
    """Uniformly random directed pairs (no self-loops) with random colors.

    Integer times make equal-time events common.
    """
    if n_nodes is None:
        n_nodes = max(2, int(rng.integers(2, max(3, n_events // 2 + 3))))
    u = rng.integers(0, n_nodes, n_events)
    v = (u + rng.integers(1, n_nodes, n_events)) % n_nodes
    t = rng.uniform(0, time_scale * max(n_events, 1), n_events)
    if integer_times:
        t = np.floor(t)
    c = rng.integers(0, len(colors), n_events)
    return TemporalNetwork.from_events(
        zip(u.tolist(), v.tolist(), t.tolist(), [colors[i] for i in c]), colors=colors
    )


def poisson_network(rng: np.random.Generator, n_events: int = 2000, n_nodes: int = 60,
                    rate: float = 0.2, colors=("m", "r")) -> TemporalNetwork:
    """Structureless stream: i.i.d. random pairs and colors at Poisson times."""
    t = np.cumsum(rng.exponential(1.0 / rate, n_events))
    u = rng.integers(0, n_nodes, n_events)
    v = (u + rng.integers(1, n_nodes, n_events)) % n_nodes
    c = rng.integers(0, len(colors), n_events)
    return TemporalNetwork.from_events(
        zip(u.tolist(), v.tolist(), t.tolist(), [colors[i] for i in c]), colors=colors
    )


def star_burst(rng, hub, leaves, start: float, mean_gap: float = 3.0, color: str = "r") -> list[tuple]:
    """``hub`` is retweeted by each leaf in quick succession: events ``(hub, leaf)``."""
    gaps = rng.exponential(mean_gap, len(leaves))
    times = start + np.cumsum(gaps)
    return [(hub, leaf, float(t), color) for leaf, t in zip(leaves, times)]


def ping_pong(rng, a, b, start: float, n: int, mean_gap: float = 60.0, color: str = "m") -> list[tuple]:
    """``a`` and ``b`` message each other alternately."""
    gaps = rng.uniform(0.5 * mean_gap, 1.5 * mean_gap, n)
    times = start + np.cumsum(gaps)
    return [((a, b) if i % 2 == 0 else (b, a)) + (float(t), color) for i, t in enumerate(times)]


def planted_regimes(rng: np.random.Generator, n_slots: int = 100, parallel: int = 4,
                    n_nodes: int = 60, gap: float = 300.0, star_gap: float = 3.0,
                    chain_gap: float = 30.0, size: tuple[int, int] = (8, 16)) -> TemporalNetwork:
    """Star-retweet bursts and reciprocated ping-pong chains.

    Time is cut into slots separated by ``gap`` seconds of silence. In each
    slot ``parallel`` episodes run concurrently on disjoint nodes drawn from
    one shared pool, alternating between the two behaviours. Each episode is
    thus its own temporal component, while every node takes part in both
    behaviours over the whole stream.
    """
    records: list[tuple] = []
    t = 0.0
    for s in range(n_slots):
        pool = rng.permutation(n_nodes).tolist()
        end = t
        for p in range(parallel):
            k = int(rng.integers(size[0], size[1] + 1))
            if (s + p) % 2 == 0:
                hub = pool.pop()
                leaves = [pool.pop() for _ in range(min(k, len(pool) - 2))]
                ev = star_burst(rng, hub, leaves, t, star_gap)
            else:
                a, b = pool.pop(), pool.pop()
                ev = ping_pong(rng, a, b, t, k, chain_gap)
            records.extend(ev)
            end = max(end, ev[-1][2])
        t = end + gap
    return TemporalNetwork.from_events(records, colors=("m", "r"))


def straddling_bursts(rng: np.random.Generator, n_episodes: int = 120,
                      width: float = 600.0) -> TemporalNetwork:
    """Episodes of three behaviours (star-retweet burst, ping-pong chain,
    in-star of messages) whose start times are scattered so that many
    episodes straddle multiples of ``width``, with several episodes
    overlapping in every interval. Episodes use disjoint node sets.
    """
    records: list[tuple] = []
    span = n_episodes * width / 4.0
    next_node = 0

    def fresh(k):
        nonlocal next_node
        ids = list(range(next_node, next_node + k))
        next_node += k
        return ids

    for i in range(n_episodes):
        start = float(rng.uniform(0, span))
        kind = i % 3
        if kind == 0:
            hub, *leaves = fresh(int(rng.integers(8, 14)))
            records.extend(star_burst(rng, hub, leaves, start, mean_gap=15.0))
        elif kind == 1:
            a, b = fresh(2)
            records.extend(ping_pong(rng, a, b, start, int(rng.integers(8, 14)), mean_gap=40.0))
        else:
            hub, *senders = fresh(int(rng.integers(8, 14)))
            gaps = rng.exponential(30.0, len(senders))
            for s, tt in zip(senders, start + np.cumsum(gaps)):
                records.append((s, hub, float(tt), "m"))
    return TemporalNetwork.from_events(records, colors=("m", "r"))
