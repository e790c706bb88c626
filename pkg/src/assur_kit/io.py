"""JSON documents for frameworks, crossing sketches and linkages.

A framework document has "inner", "pins", "edges" and optionally "config"
(id -> [x, y]) and "crossings" (list of edge pairs). A linkage document adds
"driver": {"kind", "vertices", "rate"}.
"""

from __future__ import annotations

import json
from typing import Any

from .mechanism import Driver, Linkage
from .model import Configuration, Edge, Framework, PinnedGraph, ValidationError, edge_key


class SchemaError(ValidationError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _load(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(doc, dict):
        raise SchemaError("$", "document must be an object")
    return doc


def _ids(doc: dict, key: str) -> list[str]:
    if key not in doc:
        raise SchemaError(f"$.{key}", "required key missing")
    val = doc[key]
    if not isinstance(val, list):
        raise SchemaError(f"$.{key}", "expected a list of vertex ids")
    for k, v in enumerate(val):
        if not isinstance(v, (str, int)) or isinstance(v, bool):
            raise SchemaError(f"$.{key}[{k}]", "vertex ids are strings or integers")
    return [str(v) for v in val]


def _edge(val: Any, path: str) -> Edge:
    if not isinstance(val, list) or len(val) != 2:
        raise SchemaError(path, "an edge is a two-element list")
    return str(val[0]), str(val[1])


def _graph(doc: dict) -> PinnedGraph:
    inner = _ids(doc, "inner")
    pins = _ids(doc, "pins")
    if "edges" not in doc:
        raise SchemaError("$.edges", "required key missing")
    if not isinstance(doc["edges"], list):
        raise SchemaError("$.edges", "expected a list of edges")
    edges = [_edge(e, f"$.edges[{k}]") for k, e in enumerate(doc["edges"])]
    known = set(inner) | set(pins)
    for k, (u, v) in enumerate(edges):
        for x in (u, v):
            if x not in known:
                raise SchemaError(f"$.edges[{k}]", f"unknown vertex {x!r}")
    return PinnedGraph(frozenset(inner), frozenset(pins), frozenset(edges))


def _config(val: Any, path: str) -> Configuration:
    if not isinstance(val, dict):
        raise SchemaError(path, "expected an object of id -> [x, y]")
    pts = {}
    for v, xy in val.items():
        if (not isinstance(xy, list) or len(xy) != 2
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in xy)):
            raise SchemaError(f"{path}.{v}", "a point is [x, y] with numbers")
        pts[str(v)] = (float(xy[0]), float(xy[1]))
    return Configuration(pts)


def parse_document(text: str) -> tuple[PinnedGraph, Configuration | None, dict]:
    doc = _load(text)
    g = _graph(doc)
    c = _config(doc["config"], "$.config") if doc.get("config") is not None else None
    if c is not None:
        missing = sorted(g.vertices - set(c.keys()))
        if missing:
            raise SchemaError("$.config", f"no position for {missing}")
        c = c.restricted(sorted(g.vertices))
    return g, c, doc


def parse_framework(text: str) -> Framework | PinnedGraph:
    """A Framework when the document carries a configuration, else the bare graph."""
    g, c, _ = parse_document(text)
    return g if c is None else Framework(g, c)


def parse_crossings(doc: dict) -> list[tuple[Edge, Edge]]:
    raw = doc.get("crossings") or []
    if not isinstance(raw, list):
        raise SchemaError("$.crossings", "expected a list of edge pairs")
    out = []
    for k, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(f"$.crossings[{k}]", "a crossing is a pair of edges")
        out.append((edge_key(*_edge(pair[0], f"$.crossings[{k}][0]")),
                    edge_key(*_edge(pair[1], f"$.crossings[{k}][1]"))))
    return out


def parse_config(text: str) -> Configuration:
    doc = _load(text)
    return _config(doc.get("config", doc), "$.config" if "config" in doc else "$")


def parse_linkage(text: str) -> tuple[Linkage, Configuration | None]:
    g, c, doc = parse_document(text)
    d = doc.get("driver")
    if not isinstance(d, dict):
        raise SchemaError("$.driver", "required object missing")
    for key in ("kind", "vertices"):
        if key not in d:
            raise SchemaError(f"$.driver.{key}", "required key missing")
    if not isinstance(d["vertices"], list):
        raise SchemaError("$.driver.vertices", "expected a list of vertex ids")
    rate = d.get("rate", 1.0)
    if not isinstance(rate, (int, float)) or isinstance(rate, bool):
        raise SchemaError("$.driver.rate", "expected a number")
    driver = Driver(str(d["kind"]), tuple(str(v) for v in d["vertices"]), float(rate))
    return Linkage(g, driver), c


def graph_to_dict(g: PinnedGraph) -> dict:
    return {"inner": sorted(g.inner), "pins": sorted(g.pins), "edges": [list(e) for e in g.sorted_edges()]}


def framework_to_dict(f: Framework | PinnedGraph) -> dict:
    if isinstance(f, PinnedGraph):
        return graph_to_dict(f)
    doc = graph_to_dict(f.graph)
    doc["config"] = {v: list(xy) for v, xy in f.config.points.items()}
    return doc


def linkage_to_dict(l: Linkage, c: Configuration | None = None) -> dict:
    doc = graph_to_dict(l.graph)
    if c is not None:
        doc["config"] = {v: list(xy) for v, xy in c.points.items()}
    doc["driver"] = l.driver.to_dict()
    return doc


def dumps(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2)
