"""Table and JSON writers for pipeline artifacts."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .features import DESCRIPTORS, FeatureVector
from .motifs import MotifDistribution


def _plain(value: Any) -> Any:
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def dumps(payload: Any) -> str:
    return json.dumps(_plain(payload), indent=2) + "\n"


def write_json(path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    return path


def _cell(v: Any) -> str:
    v = _plain(v)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def table_text(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def write_table(stem, rows: Sequence[dict], columns: Sequence[str] | None = None,
                fmt: str = "csv") -> Path:
    """Write ``rows`` to ``stem.csv`` or ``stem.json`` depending on ``fmt``."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = stem.with_suffix(".csv")
        path.write_text(table_text(rows, columns), encoding="utf-8")
    elif fmt == "json":
        path = stem.with_suffix(".json")
        if columns is not None:
            rows = [{c: r.get(c) for c in columns} for r in rows]
        path.write_text(dumps(list(rows)), encoding="utf-8")
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- artifact row builders ---------------------------------------------------


def component_records(comps: Iterable) -> list[dict]:
    return [c.to_dict() for c in comps]


def barcode_rows(comps: Iterable) -> list[dict]:
    """One row per event: ``(component_id, time)``."""
    rows = []
    for c in comps:
        rows.extend({"component_id": c.id, "time": float(t)} for t in np.sort(c.times))
    return rows


def motif_rows(dists: Sequence[tuple[int, MotifDistribution]]) -> tuple[list[dict], list[str]]:
    if not dists:
        return [], ["component_id"]
    names = [m.name for m in dists[0][1].labels]
    rows = []
    for cid, d in dists:
        row = {"component_id": cid}
        row.update(zip(names, d.prevalences.tolist()))
        rows.append(row)
    return rows, ["component_id"] + names


def feature_rows(vectors: Sequence[FeatureVector], which: str = "vector") -> tuple[list[dict], list[str]]:
    """Feature matrix rows: component id, the four descriptors, then features
    in the fixed layout."""
    if not vectors:
        return [], ["component_id", *DESCRIPTORS]
    names = vectors[0].names
    rows = []
    for v in vectors:
        row = {"component_id": v.component_id}
        row.update(zip(DESCRIPTORS, v.summary.as_tuple()))
        row.update(zip(names, getattr(v, which).tolist()))
        rows.append(row)
    return rows, ["component_id", *DESCRIPTORS, *names]


def read_feature_table(path) -> tuple[np.ndarray, np.ndarray, list[str], np.ndarray]:
    """Read a feature CSV written by :func:`feature_rows`.

    Returns ``(component_ids, features, feature_names, descriptors)``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = [row for row in reader if row]
    n_desc = 1 + len(DESCRIPTORS)
    if header[:n_desc] != ["component_id", *DESCRIPTORS]:
        raise ValueError("not a feature table: unexpected leading columns")
    data = np.array([[float(x) for x in row] for row in body]).reshape(len(body), len(header))
    return (
        data[:, 0].astype(np.int64),
        data[:, n_desc:],
        header[n_desc:],
        data[:, 1:n_desc],
    )
