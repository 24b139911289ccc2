"""Temporal network data model and event-stream ingestion.

A :class:`TemporalNetwork` stores events column-wise (source index, target
index, time, color index) in time order. Node and color labels are mapped to
dense integer indices at parse time; the original labels are kept alongside.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Any, Hashable, Iterable, Iterator, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_COLOR = "m"


class ParseError(ValueError):
    """A record in an event file could not be turned into an event."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class Event:
    id: int
    source: Hashable
    target: Hashable
    time: float
    color: str = DEFAULT_COLOR


@dataclass
class ParseReport:
    n_records: int = 0
    n_events: int = 0
    n_self_loops_skipped: int = 0
    n_errors_skipped: int = 0
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_records": self.n_records,
            "n_events": self.n_events,
            "n_self_loops_skipped": self.n_self_loops_skipped,
            "n_errors_skipped": self.n_errors_skipped,
            "errors": list(self.errors),
        }


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class TemporalNetwork:
    """Immutable, time-sorted sequence of directed, colored events.

    Parameters
    ----------
    sources, targets : array of int
        Dense node indices into ``node_labels``.
    times : array of float
        Event times in seconds. Must be sorted (nondecreasing).
    colors : array of int
        Dense color indices into ``color_labels``.
    node_labels, color_labels : sequence
        Labels for the dense indices.
    """

    def __init__(
        self,
        sources: np.ndarray,
        targets: np.ndarray,
        times: np.ndarray,
        colors: np.ndarray,
        node_labels: Sequence[Hashable],
        color_labels: Sequence[str],
        report: ParseReport | None = None,
    ):
        self.sources = _frozen(np.asarray(sources, dtype=np.int64))
        self.targets = _frozen(np.asarray(targets, dtype=np.int64))
        self.times = _frozen(np.asarray(times, dtype=np.float64))
        self.colors = _frozen(np.asarray(colors, dtype=np.int64))
        self.node_labels: tuple[Hashable, ...] = tuple(node_labels)
        self.color_labels: tuple[str, ...] = tuple(color_labels)
        self.report = report or ParseReport(n_events=len(self.times))
        n = len(self.times)
        if not (len(self.sources) == len(self.targets) == len(self.colors) == n):
            raise ValueError("event columns have different lengths")
        if n and np.any(np.diff(self.times) < 0):
            raise ValueError("event times must be sorted")
        if n and np.any(self.times < 0):
            raise ValueError("event times must be non-negative")
        if not self.color_labels:
            self.color_labels = (DEFAULT_COLOR,)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_events(
        cls,
        records: Iterable[tuple],
        colors: Sequence[str] | None = None,
        allow_self_loops: bool = False,
    ) -> "TemporalNetwork":
        """Build a network from ``(source, target, time[, color])`` tuples.

        Records are stably sorted by time; ties keep input order.
        """
        src, tgt, tms, col = [], [], [], []
        report = ParseReport()
        for rec in records:
            report.n_records += 1
            u, v, t = rec[0], rec[1], float(rec[2])
            c = str(rec[3]) if len(rec) > 3 and rec[3] is not None else DEFAULT_COLOR
            if u == v and not allow_self_loops:
                report.n_self_loops_skipped += 1
                continue
            src.append(u)
            tgt.append(v)
            tms.append(t)
            col.append(c)
        return cls._assemble(src, tgt, tms, col, colors, report)

    @classmethod
    def _assemble(cls, src, tgt, tms, col, colors, report) -> "TemporalNetwork":
        times = np.asarray(tms, dtype=np.float64)
        order = np.argsort(times, kind="stable")
        if colors is None:
            color_labels = sorted(set(col)) or [DEFAULT_COLOR]
        else:
            color_labels = list(colors)
            unknown = set(col) - set(color_labels)
            if unknown:
                raise ValueError(f"colors not in declared color set: {sorted(unknown)}")
        color_index = {c: i for i, c in enumerate(color_labels)}

        node_index: dict[Hashable, int] = {}
        n = len(order)
        s = np.empty(n, dtype=np.int64)
        d = np.empty(n, dtype=np.int64)
        c = np.empty(n, dtype=np.int64)
        for k, i in enumerate(order):
            s[k] = node_index.setdefault(src[i], len(node_index))
            d[k] = node_index.setdefault(tgt[i], len(node_index))
            c[k] = color_index[col[i]]
        report.n_events = n
        return cls(s, d, times[order], c, list(node_index), color_labels, report)

    # -- accessors --------------------------------------------------------

    def __len__(self) -> int:
        return len(self.times)

    @property
    def n_events(self) -> int:
        return len(self.times)

    @property
    def n_nodes(self) -> int:
        return len(self.node_labels)

    @property
    def n_colors(self) -> int:
        return len(self.color_labels)

    @property
    def nodes(self) -> frozenset:
        return frozenset(self.node_labels)

    def event(self, i: int) -> Event:
        return Event(
            id=int(i),
            source=self.node_labels[self.sources[i]],
            target=self.node_labels[self.targets[i]],
            time=float(self.times[i]),
            color=self.color_labels[self.colors[i]],
        )

    def __iter__(self) -> Iterator[Event]:
        nodes, colors = self.node_labels, self.color_labels
        cols = zip(self.sources.tolist(), self.targets.tolist(), self.times.tolist(), self.colors.tolist())
        for i, (u, v, t, c) in enumerate(cols):
            yield Event(i, nodes[u], nodes[v], t, colors[c])

    @property
    def events(self) -> list[Event]:
        return list(self)

    def records(self) -> list[tuple]:
        """Events as ``(source, target, time, color)`` label tuples."""
        nodes, colors = self.node_labels, self.color_labels
        return [
            (nodes[u], nodes[v], t, colors[c])
            for u, v, t, c in zip(self.sources.tolist(), self.targets.tolist(),
                                  self.times.tolist(), self.colors.tolist())
        ]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TemporalNetwork):
            return NotImplemented
        return (
            self.records() == other.records()
            and self.color_labels == other.color_labels
        )

    def __hash__(self) -> int:
        return hash((len(self), self.color_labels))

    def __repr__(self) -> str:
        return (
            f"TemporalNetwork(n_events={self.n_events}, n_nodes={self.n_nodes}, "
            f"colors={list(self.color_labels)})"
        )

    def with_times(self, times: np.ndarray) -> "TemporalNetwork":
        """Return a network with the same (source, target, color) sequence and
        new times, re-sorted stably and re-indexed."""
        records = [
            (self.node_labels[u], self.node_labels[v], t, self.color_labels[c])
            for u, v, t, c in zip(self.sources, self.targets, times, self.colors)
        ]
        return TemporalNetwork.from_events(
            records, colors=self.color_labels, allow_self_loops=True
        )


# -- parsing ----------------------------------------------------------------


def _parse_time(raw: Any, line: int) -> float:
    if isinstance(raw, bool):
        raise ParseError(line, f"non-numeric time {raw!r}")
    try:
        t = float(raw)
    except (TypeError, ValueError):
        raise ParseError(line, f"non-numeric time {raw!r}") from None
    if not math.isfinite(t):
        raise ParseError(line, f"non-finite time {raw!r}")
    if t < 0:
        raise ParseError(line, f"negative time {t}")
    return t


def _node(raw: Any, line: int, key: str) -> Hashable:
    if raw is None or isinstance(raw, (bool, float, list, dict)):
        raise ParseError(line, f"invalid {key} {raw!r}")
    if isinstance(raw, str):
        raw = raw.strip()
        if not raw:
            raise ParseError(line, f"empty {key}")
    return raw


def _iter_csv(text: str) -> Iterator[tuple[int, dict]]:
    reader = csv.reader(io.StringIO(text))
    header = None
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if header is None:
            header = [h.strip().lower() for h in row]
            missing = {"source", "target", "time"} - set(header)
            if missing:
                raise ParseError(line, f"header missing columns {sorted(missing)}")
            continue
        if len(row) != len(header):
            yield line, ParseError(line, f"expected {len(header)} fields, got {len(row)}")
            continue
        yield line, dict(zip(header, row))


def _iter_jsonl(text: str) -> Iterator[tuple[int, dict]]:
    for line, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            yield line, ParseError(line, f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            yield line, ParseError(line, "record is not an object")
            continue
        yield line, obj


def parse_events(
    stream: IO[bytes] | IO[str] | bytes | str,
    format: str = "csv",
    *,
    allow_self_loops: bool = False,
    skip_errors: bool = False,
    colors: Sequence[str] | None = None,
) -> TemporalNetwork:
    """Parse an event file into a :class:`TemporalNetwork`.

    ``format`` is ``"csv"`` (header ``source,target,time[,color]``) or
    ``"jsonl"``. Malformed records raise :class:`ParseError` unless
    ``skip_errors`` is set, in which case they are counted in the network's
    ``report``. Self-loops are dropped with a warning unless
    ``allow_self_loops``.
    """
    if hasattr(stream, "read"):
        stream = stream.read()
    text = stream.decode("utf-8") if isinstance(stream, bytes) else stream
    if text.startswith("﻿"):
        text = text[1:]
    if format == "csv":
        rows = _iter_csv(text)
    elif format == "jsonl":
        rows = _iter_jsonl(text)
    else:
        raise ValueError(f"unknown format {format!r}")

    report = ParseReport()
    src, tgt, tms, col = [], [], [], []
    for line, rec in rows:
        report.n_records += 1
        try:
            if isinstance(rec, ParseError):
                raise rec
            for key in ("source", "target", "time"):
                if key not in rec:
                    raise ParseError(line, f"missing field {key!r}")
            u = _node(rec["source"], line, "source")
            v = _node(rec["target"], line, "target")
            t = _parse_time(rec["time"], line)
            c = rec.get("color")
            c = DEFAULT_COLOR if c is None or str(c).strip() == "" else str(c).strip()
        except ParseError as exc:
            if not skip_errors:
                raise
            report.n_errors_skipped += 1
            report.errors.append(str(exc))
            continue
        if u == v and not allow_self_loops:
            report.n_self_loops_skipped += 1
            logger.warning("line %d: self-loop %r skipped", line, u)
            continue
        src.append(u)
        tgt.append(v)
        tms.append(t)
        col.append(c)
    return TemporalNetwork._assemble(src, tgt, tms, col, colors, report)


def read_events(path, format: str | None = None, **kwargs) -> TemporalNetwork:
    """Read an event file, inferring the format from the extension."""
    path = str(path)
    if format is None:
        format = "jsonl" if path.endswith((".jsonl", ".ndjson")) else "csv"
    with open(path, "rb") as fh:
        return parse_events(fh, format, **kwargs)


def serialize_events(network: TemporalNetwork, format: str = "csv") -> str:
    """Inverse of :func:`parse_events` (up to record order, which is time order)."""
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["source", "target", "time", "color"])
        for e in network:
            writer.writerow([e.source, e.target, repr(e.time), e.color])
        return buf.getvalue()
    if format == "jsonl":
        return "".join(
            json.dumps(
                {"source": e.source, "target": e.target, "time": e.time, "color": e.color}
            )
            + "\n"
            for e in network
        )
    raise ValueError(f"unknown format {format!r}")


def summarize(network: TemporalNetwork) -> dict[str, Any]:
    """Event, node and color counts plus the observed time span."""
    n = network.n_events
    counts = np.bincount(network.colors, minlength=network.n_colors) if n else np.zeros(
        network.n_colors, dtype=int
    )
    color_counts = {c: int(k) for c, k in zip(network.color_labels, counts)}
    color_fractions = {c: (k / n if n else 0.0) for c, k in color_counts.items()}
    if n:
        span = {
            "start": float(network.times[0]),
            "end": float(network.times[-1]),
            "duration": float(network.times[-1] - network.times[0]),
        }
    else:
        span = None
    return {
        "n_events": n,
        "n_nodes": network.n_nodes if n else 0,
        "color_counts": color_counts if n else {},
        "color_fractions": color_fractions if n else {},
        "time_span": span,
        "parse": network.report.to_dict(),
    }
