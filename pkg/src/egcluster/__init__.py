"""Temporal components of event streams: event graphs, colored motif
embeddings, Ward clustering and time-shuffled null models."""
from .events import Event, ParseError, TemporalNetwork, parse_events, read_events, summarize
from .event_graph import (
    EventGraph,
    TemporalComponent,
    build_event_graph,
    build_streaming,
    components,
    dt_scan,
    threshold,
)
from .motifs import MotifLabel, classify, enumerate_motifs, motif_distribution
from .features import FeatureVector, complete_vector, embed

__version__ = "0.1.0"
