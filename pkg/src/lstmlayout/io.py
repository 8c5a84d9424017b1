"""Line-delimited JSON dataset files.

The first line is a header ``{"format", "version", "canvas", "style", "meta"}``;
every following line is one graph record. Floats are written with ``repr``
precision, so coordinates survive a round trip exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .generators import DatasetEntry, DrawingDataset
from .graph import Graph, GraphError
from .layouts import Canvas

DATASET_FORMAT = "lstmlayout-dataset"
DATASET_VERSION = 1


class DatasetFormatError(ValueError):
    pass


def entry_to_record(e: DatasetEntry, style: str | None) -> dict:
    g = e.graph
    rec = {"id": e.id, "n": g.n, "edges": [list(x) for x in g.edges], "split": e.split, "style": style,
           "meta": g.meta}
    if g.communities is not None:
        rec["communities"] = list(g.communities)
    if e.layout is not None:
        rec["layout"] = np.asarray(e.layout, dtype=np.float64).tolist()
    return rec


def record_to_entry(rec: dict) -> DatasetEntry:
    try:
        g = Graph.from_edges(rec["n"], rec["edges"], rec.get("communities"), rec.get("meta") or {})
    except KeyError as err:
        raise DatasetFormatError(f"record {rec.get('id', '?')} lacks field {err}") from None
    lay = rec.get("layout")
    if lay is not None:
        lay = np.array(lay, dtype=np.float64).reshape(-1, 2)
        if len(lay) != g.n:
            raise DatasetFormatError(f"record {rec.get('id')}: layout has {len(lay)} rows for {g.n} nodes")
    return DatasetEntry(g, lay, rec.get("split", "train"), rec.get("id", ""))


def save_dataset(path, ds: DrawingDataset, canvas: Canvas = Canvas()) -> None:
    header = {"format": DATASET_FORMAT, "version": DATASET_VERSION,
              "canvas": [canvas.width, canvas.height, canvas.margin], "style": ds.style, "meta": ds.meta}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for e in ds.entries:
            fh.write(json.dumps(entry_to_record(e, ds.style)) + "\n")


def load_dataset(path) -> DrawingDataset:
    path = Path(path)
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
        records = [json.loads(ln) for ln in lines[1:]]
    except json.JSONDecodeError as err:
        raise DatasetFormatError(f"{path}: malformed line ({err})") from None
    if header.get("format") != DATASET_FORMAT:
        raise DatasetFormatError(f"{path}: missing dataset header")
    if header.get("version") != DATASET_VERSION:
        raise DatasetFormatError(f"{path}: dataset version {header.get('version')} is not supported "
                                 f"(expected {DATASET_VERSION})")
    try:
        entries = [record_to_entry(r) for r in records]
    except GraphError as err:
        raise DatasetFormatError(f"{path}: {err}") from None
    return DrawingDataset(entries, header.get("style"), header.get("meta") or {})


def canvas_of(path) -> Canvas:
    with open(path) as fh:
        header = json.loads(fh.readline())
    w, h, m = header.get("canvas", [800, 800, 40])
    return Canvas(w, h, m)
