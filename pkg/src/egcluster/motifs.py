"""Two-event temporal motifs with event colors.

Every event-graph edge ``(e1, e2)`` is one motif instance. The base pattern is
fixed by which nodes the two events share and in which role; event colors
refine it, giving ``6 * c**2`` labels for ``c`` colors.

Canonical label order (the feature-vector layout) is base pattern in the
order of :data:`BASES`, then color of the earlier event, then color of the
later event.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .events import Event

if TYPE_CHECKING:
    from .event_graph import TemporalComponent

BASES: tuple[str, ...] = ("ABAB", "ABBA", "ABAC", "ABCA", "ABBC", "ABCB")
ABAB, ABBA, ABAC, ABCA, ABBC, ABCB = range(6)
#: base code of pairs that cannot be classified (an event is a self-loop)
UNCLASSIFIED = -1


class NotAdjacentError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class MotifLabel:
    base: int
    color1: str
    color2: str

    @property
    def base_name(self) -> str:
        return BASES[self.base]

    @property
    def name(self) -> str:
        b = BASES[self.base]
        return f"{b[:2]}{self.color1}{b[2:]}{self.color2}"

    def __str__(self) -> str:
        return self.name


def base_code(u1, v1, u2, v2) -> int:
    """Base pattern of the ordered pair ``(u1->v1)`` then ``(u2->v2)``.

    Both-node cases take precedence over the single shared-node cases.
    """
    if u1 == v1 or u2 == v2:
        return UNCLASSIFIED
    if u1 == u2 and v1 == v2:
        return ABAB
    if u1 == v2 and v1 == u2:
        return ABBA
    if u1 == u2:
        return ABAC
    if u1 == v2:
        return ABCA
    if v1 == u2:
        return ABBC
    if v1 == v2:
        return ABCB
    raise NotAdjacentError("events share no node: not adjacent")


def _pattern_table() -> np.ndarray:
    """Base code for each 4-bit pattern of node equalities
    ``u1==u2 | v1==v2 << 1 | u1==v2 << 2 | v1==u2 << 3``."""
    table = np.full(16, UNCLASSIFIED, dtype=np.int8)
    for key in range(16):
        a, b, c, d = (key >> i & 1 for i in range(4))
        for hit, code in ((a and b, ABAB), (c and d, ABBA), (a, ABAC), (c, ABCA), (d, ABBC), (b, ABCB)):
            if hit:
                table[key] = code
                break
    return table


_PATTERNS = _pattern_table()


def base_codes(u1: np.ndarray, v1: np.ndarray, u2: np.ndarray, v2: np.ndarray) -> np.ndarray:
    """Vectorised :func:`base_code` over arrays of node indices.

    Pairs sharing no node get :data:`UNCLASSIFIED`; callers only pass
    adjacent pairs.
    """
    key = (u1 == u2).view(np.uint8) | (v1 == v2).view(np.uint8) << 1
    key |= (u1 == v2).view(np.uint8) << 2
    key |= (v1 == u2).view(np.uint8) << 3
    codes = _PATTERNS[key]
    loops = (u1 == v1) | (u2 == v2)
    if loops.any():
        codes[loops] = UNCLASSIFIED
    return codes


def classify(e1: Event, e2: Event) -> MotifLabel:
    """Motif label of the ordered event pair ``e1`` then ``e2``."""
    if (e1.time, e1.id) >= (e2.time, e2.id):
        raise ValueError(
            f"events out of order: ({e1.time}, {e1.id}) must precede ({e2.time}, {e2.id})"
        )
    if e1.source == e1.target or e2.source == e2.target:
        raise ValueError("self-loop events have no motif")
    b = base_code(e1.source, e1.target, e2.source, e2.target)
    return MotifLabel(b, e1.color, e2.color)


def enumerate_motifs(colors: Sequence[str]) -> list[MotifLabel]:
    """All ``6 * c**2`` labels in canonical order."""
    colors = list(colors)
    if not colors:
        raise ValueError("color set must be nonempty")
    if len(set(colors)) != len(colors):
        raise ValueError("duplicate colors")
    return [MotifLabel(b, c1, c2) for b in range(6) for c1 in colors for c2 in colors]


def motif_names(colors: Sequence[str]) -> list[str]:
    return [m.name for m in enumerate_motifs(colors)]


def label_codes(base: np.ndarray, color1: np.ndarray, color2: np.ndarray, n_colors: int) -> np.ndarray:
    """Index of each (base, color1, color2) in :func:`enumerate_motifs` order;
    unclassified pairs map to -1."""
    base = np.asarray(base, dtype=np.int64)
    codes = base * n_colors * n_colors + np.asarray(color1) * n_colors + np.asarray(color2)
    return np.where(base < 0, -1, codes)


@dataclass
class MotifDistribution:
    labels: list[MotifLabel]
    counts: np.ndarray
    prevalences: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict[str, float]:
        return {m.name: float(p) for m, p in zip(self.labels, self.prevalences)}

    def count_dict(self) -> dict[str, int]:
        return {m.name: int(k) for m, k in zip(self.labels, self.counts)}

    @classmethod
    def from_counts(cls, labels: list[MotifLabel], counts) -> "MotifDistribution":
        counts = np.asarray(counts, dtype=np.int64)
        total = counts.sum()
        prev = counts / total if total else np.zeros(len(counts))
        return cls(labels, counts, prev)

    @classmethod
    def from_labels(cls, observed: Sequence[MotifLabel], colors: Sequence[str]) -> "MotifDistribution":
        labels = enumerate_motifs(colors)
        tally = Counter(observed)
        return cls.from_counts(labels, [tally.get(m, 0) for m in labels])


def motif_distribution(component: "TemporalComponent") -> MotifDistribution:
    """Motif counts and prevalences over the component's event-graph edges.

    Edges touching a self-loop event are not counted.
    """
    if component.n_edges == 0:
        raise ValueError("component has no edges; motif distribution undefined")
    net = component.network
    c = net.n_colors
    codes = component.motif_codes()
    codes = codes[codes >= 0]
    counts = np.bincount(codes, minlength=6 * c * c)
    return MotifDistribution.from_counts(enumerate_motifs(net.color_labels), counts)


def collapse_colors(values: np.ndarray, n_colors: int) -> np.ndarray:
    """Sum motif columns over colors, leaving one column per base pattern.

    ``values`` has motif columns in canonical order along the last axis.
    """
    values = np.asarray(values)
    shape = values.shape[:-1] + (6, n_colors * n_colors)
    return values.reshape(shape).sum(axis=-1)
