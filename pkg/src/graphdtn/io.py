"""Graph files (JSON), function files (CSV) and report serialization."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from .graph import BesovParams, GraphError, MetricMeasureGraph

GRAPH_SCHEMA = {
    "type": "object",
    "required": ["vertices", "edges"],
    "properties": {
        "params": {
            "type": "object",
            "required": ["p"],
            "properties": {
                "p": {"type": "number"},
                "theta": {"type": "number"},
                "Theta": {"type": "number"},
            },
            "not": {"required": ["theta", "Theta"]},
        },
        "vertices": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "boundary"],
                "properties": {
                    "id": {"type": "string"},
                    "boundary": {"type": "boolean"},
                    "mu": {"type": "number"},
                    "nu": {"type": "number"},
                    "pos": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                },
                "if": {"properties": {"boundary": {"const": True}}},
                "then": {"required": ["nu"]},
                "else": {"required": ["mu"]},
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["u", "v", "length", "mu"],
                "properties": {
                    "u": {"type": "string"},
                    "v": {"type": "string"},
                    "length": {"type": "number"},
                    "mu": {"type": "number"},
                },
            },
        },
    },
}


def check_document(doc: Any) -> None:
    """Validate a parsed graph file against :data:`GRAPH_SCHEMA`."""
    try:
        jsonschema.validate(doc, GRAPH_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(k) for k in exc.absolute_path) or "document"
        raise GraphError(f"graph file invalid at {where}: {exc.message}") from None


def graph_from_document(doc: Mapping) -> tuple[MetricMeasureGraph, dict]:
    check_document(doc)
    return MetricMeasureGraph.from_records(doc["vertices"], doc["edges"]), dict(doc.get("params", {}))


def load_graph(path: str | Path) -> tuple[MetricMeasureGraph, dict]:
    """Read a graph file; returns the graph and its ``params`` block."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return graph_from_document(doc)


def graph_document(graph: MetricMeasureGraph, params: Mapping | None = None) -> dict:
    verts = []
    for k, vid in enumerate(graph.ids):
        v = {"id": vid, "boundary": bool(graph.is_boundary[k])}
        if graph.is_boundary[k]:
            v["nu"] = float(graph.nu[k])
        else:
            v["mu"] = float(graph.mu[k])
        if graph.pos is not None:
            v["pos"] = [float(c) for c in graph.pos[k]]
        verts.append(v)
    edges = [{"u": graph.ids[a], "v": graph.ids[b], "length": float(l), "mu": float(m)}
             for (a, b), l, m in zip(graph.edges, graph.lengths, graph.edge_mu)]
    doc = {"vertices": verts, "edges": edges}
    if params is not None:
        doc = {"params": dict(params), **doc}
    return doc


def dump_json(doc: Any) -> str:
    """Deterministic JSON: sorted keys, reals at 17 significant digits,
    non-finite reals as ``null``."""
    return _encode(_plain(doc), 0) + "\n"


def _encode(obj, depth):
    pad = " " * (depth + 1)
    end = " " * depth
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(obj[k], depth + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _encode(v, depth + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, float):
        text = format(obj, ".17g")
        # keep reals recognizable as reals after parsing
        return text if any(c in text for c in ".en") else text + ".0"
    return json.dumps(obj)


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def params_from(block: Mapping, p: float | None = None, theta: float | None = None,
                Theta: float | None = None) -> BesovParams:
    """Besov parameters from a file ``params`` block with command-line overrides."""
    p = p if p is not None else block.get("p")
    if p is None:
        raise GraphError("no exponent p given")
    if theta is None and Theta is None:
        theta, Theta = block.get("theta"), block.get("Theta")
    if theta is None and Theta is None:
        raise GraphError("give theta or Theta (file params or flag)")
    return BesovParams.from_any(float(p), theta, Theta)


def read_function(path: str | Path) -> tuple[str, dict[str, float]]:
    """Read ``id,value`` or ``id,weight`` CSV; returns (column name, mapping)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise GraphError(f"{path}: empty function file") from None
        if len(header) != 2 or header[0] != "id" or header[1] not in ("value", "weight"):
            raise GraphError(f"{path}: header must be 'id,value' or 'id,weight'")
        values: dict[str, float] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise GraphError(f"{path}:{lineno}: expected two columns")
            key = row[0].strip()
            if key in values:
                raise GraphError(f"{path}:{lineno}: duplicate id {key!r}")
            try:
                x = float(row[1])
            except ValueError:
                raise GraphError(f"{path}:{lineno}: not a number: {row[1]!r}") from None
            if not math.isfinite(x):
                raise GraphError(f"{path}:{lineno}: non-finite value")
            values[key] = x
    return header[1], values


def function_csv(ids, values, column: str = "value") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", column])
    for i, x in zip(ids, values):
        w.writerow([i, format(float(x), ".17g")])
    return buf.getvalue()


def series_csv(x, y) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y"])
    for a, b in zip(x, y):
        w.writerow([format(float(a), ".17g"), format(float(b), ".17g")])
    return buf.getvalue()


def _flatten(obj, prefix=""):
    if isinstance(obj, Mapping):
        for k in sorted(obj, key=str):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple, np.ndarray)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def emit_report(report: Any, format: str = "json") -> bytes:
    """Serialize a report (dataclass with ``as_dict``, or a mapping).

    JSON output has sorted keys and 17-digit reals; CSV output is
    ``key,value`` rows with nested keys dotted and list entries indexed.
    Non-finite reals become ``null`` (JSON) or an empty cell (CSV).
    """
    data = report.as_dict() if hasattr(report, "as_dict") else report
    if format == "json":
        return dump_json(data).encode()
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in _flatten(_plain(data)):
            w.writerow([k, "" if v is None else format_value(v)])
        return buf.getvalue().encode()
    raise ValueError(f"unknown format {format!r}")


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)
