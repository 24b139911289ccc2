"""Event graph construction and temporal decomposition.

The event graph has one node per event. Each event is linked to the next
event of each of its two participants, weighted by the inter-event time.
Removing edges heavier than ``delta_t`` and taking weakly-connected
components yields temporal components.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Iterator, Sequence

import numpy as np

from .events import DEFAULT_COLOR, ParseReport, TemporalNetwork
from .motifs import base_codes, label_codes

logger = logging.getLogger(__name__)


class OutOfOrderError(ValueError):
    pass


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.n_sets = n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        """Merge the sets of ``a`` and ``b``; return the surviving root."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.n_sets -= 1
        return ra

    def roots(self) -> np.ndarray:
        return np.fromiter((self.find(i) for i in range(len(self.parent))), dtype=np.int64,
                           count=len(self.parent))


class EventGraph:
    """Directed acyclic graph over the events of a :class:`TemporalNetwork`.

    Edges are stored column-wise and sorted by ``(succ, pred)``. ``base`` holds
    the motif base pattern of each edge (see :mod:`egcluster.motifs`).
    """

    def __init__(self, network: TemporalNetwork, pred, succ, base=None):
        self.network = network
        self.pred = np.asarray(pred, dtype=np.int64)
        self.succ = np.asarray(succ, dtype=np.int64)
        t = network.times
        self.iet = t[self.succ] - t[self.pred]
        if base is None:
            s, d = network.sources, network.targets
            base = base_codes(s[self.pred], d[self.pred], s[self.succ], d[self.succ])
        self.base = np.asarray(base, dtype=np.int8)
        for a in (self.pred, self.succ, self.iet, self.base):
            a.setflags(write=False)

    @property
    def n_events(self) -> int:
        return self.network.n_events

    @property
    def n_edges(self) -> int:
        return len(self.pred)

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.pred.tolist(), self.succ.tolist()))

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edges())

    def motif_codes(self, edge_ids: np.ndarray | None = None) -> np.ndarray:
        """Colored motif index of each edge in canonical label order."""
        idx = slice(None) if edge_ids is None else edge_ids
        p, s = self.pred[idx], self.succ[idx]
        col = self.network.colors
        return label_codes(self.base[idx], col[p], col[s], self.network.n_colors)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.succ, minlength=self.n_events)

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.pred, minlength=self.n_events)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventGraph):
            return NotImplemented
        return (
            np.array_equal(self.pred, other.pred)
            and np.array_equal(self.succ, other.succ)
            and np.array_equal(self.base, other.base)
            and np.array_equal(self.iet, other.iet)
        )

    def __repr__(self) -> str:
        return f"EventGraph(n_events={self.n_events}, n_edges={self.n_edges})"


def _stable_argsort_ids(keys: np.ndarray) -> np.ndarray:
    """Stable argsort of non-negative integer ids in linear time.

    numpy sorts 16-bit keys stably with a radix sort, so ids below 2**32 are
    sorted with at most two 16-bit passes (least significant digit first).
    """
    if len(keys) == 0:
        return np.zeros(0, dtype=np.int64)
    top = int(keys.max())
    if top < 1 << 16:
        return np.argsort(keys.astype(np.uint16), kind="stable")
    if top >= 1 << 32:
        return np.argsort(keys, kind="stable")
    order = np.argsort((keys & 0xFFFF).astype(np.uint16), kind="stable")
    return order[np.argsort((keys[order] >> 16).astype(np.uint16), kind="stable")]


#: events per block in the batch build; keeps the working set cache-resident
BUILD_BLOCK = 8192


def _block_edges(src: np.ndarray, tgt: np.ndarray, offset: int, last: np.ndarray):
    """Edges whose successor lies in one block of events.

    ``last`` maps node index to the latest event id seen before the block and
    is updated in place, as in the streaming builder.
    """
    b = len(src)
    node = np.empty(2 * b, dtype=np.int64)
    node[0::2], node[1::2] = src, tgt
    loops = src == tgt
    if loops.any():
        slots = np.flatnonzero(~np.repeat(loops, 2) | (np.arange(2 * b) % 2 == 0))
        order = slots[_stable_argsort_ids(node[slots])]
    else:
        order = _stable_argsort_ids(node)
    keys = node[order]
    same = keys[1:] == keys[:-1]
    # previous event of the same node: inside the block when the sorted
    # neighbour shares the node, otherwise from the table
    before = last[keys]
    before[1:] = np.where(same, (order[:-1] >> 1) + offset, before[1:])
    prev = np.full(2 * b, -1, dtype=np.int64)
    prev[order] = before
    ends = np.flatnonzero(np.concatenate((~same, [True])))
    last[keys[ends]] = (order[ends] >> 1) + offset

    u, w = prev[0::2], prev[1::2]
    lo, hi = np.minimum(u, w), np.maximum(u, w)
    lo[lo == hi] = -1  # both nodes last met in the same event: one edge
    cand = np.empty(2 * b, dtype=np.int64)
    cand[0::2], cand[1::2] = lo, hi
    idx = np.flatnonzero(cand >= 0)
    return cand[idx], (idx >> 1) + offset


def build_event_graph(network: TemporalNetwork, block: int = BUILD_BLOCK) -> EventGraph:
    """Batch construction: link consecutive events of every node.

    An event pair that is consecutive for both of its shared nodes yields a
    single edge. Events are processed in blocks of ``block`` events carrying a
    per-node table of last events between blocks, so the cost per event does
    not grow with the stream length.
    """
    n = network.n_events
    if n == 0:
        return EventGraph(network, [], [])
    s, d = network.sources, network.targets
    last = np.full(network.n_nodes, -1, dtype=np.int64)
    preds, succs, bases = [], [], []
    for lo in range(0, n, block):
        p, q = _block_edges(s[lo : lo + block], d[lo : lo + block], lo, last)
        preds.append(p)
        succs.append(q)
        bases.append(base_codes(s[p], d[p], s[q], d[q]))
    return EventGraph(network, np.concatenate(preds), np.concatenate(succs), np.concatenate(bases))


class StreamingEventGraph:
    """Incremental event-graph builder for time-ordered event feeds.

    Each pushed event costs two lookups in the map of last events per node.
    With ``lateness > 0`` events are held in a buffer and released once no
    earlier event can still arrive, tolerating disorder up to ``lateness``
    seconds; events later than that are rejected.
    """

    def __init__(
        self,
        lateness: float = 0.0,
        colors: Sequence[str] | None = None,
        allow_self_loops: bool = False,
    ):
        if lateness < 0:
            raise ValueError("lateness must be non-negative")
        self.lateness = lateness
        self.allow_self_loops = allow_self_loops
        self._declared_colors = list(colors) if colors is not None else None
        self._color_index: dict[str, int] = {c: i for i, c in enumerate(colors or ())}
        self._node_index: dict[Hashable, int] = {}
        self._last: dict[int, int] = {}
        self._src: list[int] = []
        self._tgt: list[int] = []
        self._time: list[float] = []
        self._col: list[int] = []
        self._pred: list[int] = []
        self._succ: list[int] = []
        self._buffer: list[tuple[float, int, Hashable, Hashable, str]] = []
        self._arrivals = 0
        self._watermark = -math.inf
        self._max_seen = -math.inf
        self.n_self_loops_skipped = 0

    def push(self, source: Hashable, target: Hashable, time: float, color: str = DEFAULT_COLOR) -> None:
        time = float(time)
        if not time >= 0:
            raise ValueError(f"invalid time {time}")
        if source == target and not self.allow_self_loops:
            self.n_self_loops_skipped += 1
            return
        if self.lateness == 0:
            if time < self._watermark:
                raise OutOfOrderError(f"event at t={time} arrived after t={self._watermark}")
            self._watermark = time
            self._emit(source, target, time, color)
            return
        if time < self._max_seen - self.lateness:
            raise OutOfOrderError(
                f"event at t={time} is later than the {self.lateness}s reordering window"
            )
        self._max_seen = max(self._max_seen, time)
        heapq.heappush(self._buffer, (time, self._arrivals, source, target, color))
        self._arrivals += 1
        horizon = time - self.lateness
        while self._buffer and self._buffer[0][0] <= horizon:
            self._release()

    def _release(self) -> None:
        t, _, u, v, c = heapq.heappop(self._buffer)
        self._watermark = max(self._watermark, t)
        self._emit(u, v, t, c)

    def _emit(self, source, target, time, color) -> None:
        nodes = self._node_index
        u = nodes.setdefault(source, len(nodes))
        v = nodes.setdefault(target, len(nodes))
        ci = self._color_index.get(color)
        if ci is None:
            if self._declared_colors is not None:
                raise ValueError(f"color {color!r} not in declared color set")
            ci = self._color_index[color] = len(self._color_index)
        j = len(self._time)
        self._src.append(u)
        self._tgt.append(v)
        self._time.append(time)
        self._col.append(ci)

        last = self._last
        pu = last.get(u)
        pv = last.get(v) if v != u else None
        pred, succ = self._pred, self._succ
        if pv is None or pv == pu:
            if pu is not None:
                pred.append(pu)
                succ.append(j)
        elif pu is None:
            pred.append(pv)
            succ.append(j)
        else:
            pred += (pu, pv) if pu < pv else (pv, pu)
            succ += (j, j)
        last[u] = j
        last[v] = j

    def flush(self) -> None:
        while self._buffer:
            self._release()

    def finish(self) -> EventGraph:
        """Flush the buffer and return the graph built so far."""
        self.flush()
        if self._declared_colors is not None:
            labels = self._declared_colors
            colors = np.asarray(self._col, dtype=np.int64)
        else:
            seen = sorted(self._color_index, key=self._color_index.get)
            labels = sorted(seen) or [DEFAULT_COLOR]
            remap = np.array([labels.index(c) for c in seen] or [0], dtype=np.int64)
            colors = remap[np.asarray(self._col, dtype=np.int64)] if self._col else np.zeros(0, np.int64)
        report = ParseReport(
            n_records=len(self._time) + self.n_self_loops_skipped,
            n_events=len(self._time),
            n_self_loops_skipped=self.n_self_loops_skipped,
        )
        net = TemporalNetwork(
            np.asarray(self._src, dtype=np.int64),
            np.asarray(self._tgt, dtype=np.int64),
            np.asarray(self._time, dtype=np.float64),
            colors,
            list(self._node_index),
            labels,
            report,
        )
        return EventGraph(net, self._pred, self._succ)


def build_streaming(
    events: Iterable,
    lateness: float = 0.0,
    colors: Sequence[str] | None = None,
    allow_self_loops: bool = False,
) -> EventGraph:
    """Stream ``events`` (``Event`` objects or ``(source, target, time[, color])``
    tuples) through a :class:`StreamingEventGraph`."""
    builder = StreamingEventGraph(lateness=lateness, colors=colors, allow_self_loops=allow_self_loops)
    push = builder.push
    if isinstance(events, TemporalNetwork):
        events = events.records()
    for ev in events:
        if isinstance(ev, tuple):
            push(*ev)
        else:
            push(ev.source, ev.target, ev.time, ev.color)
    return builder.finish()


def threshold(graph: EventGraph, delta_t: float) -> np.ndarray:
    """Indices of edges with inter-event time ``<= delta_t``, in edge order."""
    if not delta_t > 0:
        raise ValueError("delta_t must be positive")
    return np.flatnonzero(graph.iet <= delta_t)


@dataclass(eq=False)
class TemporalComponent:
    """A weakly-connected component of the thresholded event graph.

    ``edge_ids`` index into the parent graph's edge arrays.
    """

    graph: EventGraph
    event_ids: np.ndarray
    edge_ids: np.ndarray
    delta_t: float
    id: int = -1

    @property
    def network(self) -> TemporalNetwork:
        return self.graph.network

    @property
    def n_events(self) -> int:
        return len(self.event_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    @cached_property
    def times(self) -> np.ndarray:
        return self.network.times[self.event_ids]

    @property
    def start(self) -> float:
        return float(self.times.min())

    @property
    def end(self) -> float:
        return float(self.times.max())

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def iets(self) -> np.ndarray:
        return self.graph.iet[self.edge_ids]

    @cached_property
    def node_ids(self) -> np.ndarray:
        net = self.network
        return np.unique(np.concatenate([net.sources[self.event_ids], net.targets[self.event_ids]]))

    def motif_codes(self) -> np.ndarray:
        return self.graph.motif_codes(self.edge_ids)

    def to_dict(self) -> dict:
        return {
            "component_id": self.id,
            "size": self.n_events,
            "n_edges": self.n_edges,
            "start": self.start,
            "end": self.end,
            "duration": self.duration,
            "event_ids": self.event_ids.tolist(),
        }


@dataclass
class Decomposition:
    """Temporal components with at least ``min_events`` events, largest first.

    Smaller components are tallied in ``residual_components`` /
    ``residual_events`` and their events kept in ``residual_event_ids``.
    """

    components: list[TemporalComponent]
    delta_t: float
    min_events: int
    residual_components: int = 0
    residual_events: int = 0
    residual_event_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __iter__(self) -> Iterator[TemporalComponent]:
        return iter(self.components)

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    @property
    def n_total(self) -> int:
        return len(self.components) + self.residual_components


def _group(labels: np.ndarray) -> list[np.ndarray]:
    """Index arrays of equal labels, each sorted ascending."""
    if len(labels) == 0:
        return []
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    cuts = np.flatnonzero(sorted_labels[1:] != sorted_labels[:-1]) + 1
    return np.split(order, cuts)


def components(graph: EventGraph, delta_t: float, min_events: int = 5) -> Decomposition:
    """Weakly-connected components of the ``delta_t``-thresholded graph."""
    if min_events < 1:
        raise ValueError("min_events must be >= 1")
    kept = threshold(graph, delta_t)
    uf = UnionFind(graph.n_events)
    union = uf.union
    for p, s in zip(graph.pred[kept].tolist(), graph.succ[kept].tolist()):
        union(p, s)
    roots = uf.roots()
    groups = _group(roots)
    edge_groups = dict(zip(*_edge_groups(roots, graph.pred[kept], kept)))

    big, small = [], []
    for g in groups:
        (big if len(g) >= min_events else small).append(g)
    big.sort(key=lambda g: (-len(g), int(g[0])))
    comps = []
    empty = np.zeros(0, dtype=np.int64)
    for cid, g in enumerate(big):
        root = int(roots[g[0]])
        comps.append(TemporalComponent(graph, g, edge_groups.get(root, empty), delta_t, cid))
    residual_ids = np.sort(np.concatenate(small)) if small else empty
    return Decomposition(
        comps,
        delta_t,
        min_events,
        residual_components=len(small),
        residual_events=int(len(residual_ids)),
        residual_event_ids=residual_ids,
    )


def _edge_groups(roots: np.ndarray, preds: np.ndarray, kept: np.ndarray):
    if len(kept) == 0:
        return [], []
    edge_roots = roots[preds]
    groups = _group(edge_roots)
    return [int(edge_roots[g[0]]) for g in groups], [kept[g] for g in groups]


def whole_graph_component(graph: EventGraph, delta_t: float) -> TemporalComponent:
    """All events with all ``delta_t``-thresholded edges as one pseudo-component."""
    return TemporalComponent(
        graph, np.arange(graph.n_events, dtype=np.int64), threshold(graph, delta_t), delta_t, -1
    )


def static_components(network: TemporalNetwork) -> list[np.ndarray]:
    """Event ids grouped by weakly-connected component of the aggregated static graph."""
    uf = UnionFind(network.n_nodes)
    for u, v in zip(network.sources.tolist(), network.targets.tolist()):
        uf.union(u, v)
    node_roots = uf.roots()
    if network.n_events == 0:
        return []
    return _group(node_roots[network.sources])


def dt_scan(graph: EventGraph, delta_ts: Sequence[float], min_events: int = 1) -> list[dict]:
    """Component count and largest component size for each threshold.

    The grid is processed in one sweep: edges are merged in order of weight,
    so the cost is one union-find pass regardless of grid length.
    """
    grid = [float(d) for d in delta_ts]
    if not grid:
        raise ValueError("delta_t grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("delta_t grid must be ascending")
    if grid[0] <= 0:
        raise ValueError("delta_t values must be positive")

    n = graph.n_events
    order = np.argsort(graph.iet, kind="stable")
    iet = graph.iet[order]
    preds = graph.pred[order].tolist()
    succs = graph.succ[order].tolist()
    uf = UnionFind(n)
    largest = 1 if n else 0
    n_big = n if min_events <= 1 else 0
    k = 0
    out = []
    for dt in grid:
        while k < len(iet) and iet[k] <= dt:
            ra, rb = uf.find(preds[k]), uf.find(succs[k])
            if ra != rb:
                sa, sb = uf.size[ra], uf.size[rb]
                n_big -= (sa >= min_events) + (sb >= min_events)
                root = uf.union(ra, rb)
                merged = uf.size[root]
                n_big += merged >= min_events
                largest = max(largest, merged)
            k += 1
        out.append(
            {
                "delta_t": dt,
                "n_components": uf.n_sets,
                "n_components_min_events": int(n_big),
                "largest_component": int(largest),
            }
        )
    return out
