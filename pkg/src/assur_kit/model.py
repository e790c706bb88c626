"""Pinned graphs, configurations and frameworks.

Vertex ids are opaque strings. Edges are stored as sorted 2-tuples so the
same bar always has the same key regardless of input orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

Edge = tuple[str, str]
Point = tuple[float, float]

GROUND = "p*"


class ValidationError(ValueError):
    """Raised when a graph, configuration or framework breaks its invariants."""


def edge_key(u: str, v: str) -> Edge:
    u, v = str(u), str(v)
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class PinnedGraph:
    """The pinned graph G(I, P; E).

    ``inner`` are the free vertices, ``pins`` the grounded ones. Every edge has
    at least one inner endpoint.
    """

    inner: frozenset[str]
    pins: frozenset[str] = frozenset()
    edges: frozenset[Edge] = frozenset()

    def __post_init__(self):
        inner = frozenset(str(v) for v in self.inner)
        pins = frozenset(str(v) for v in self.pins)
        edges = []
        for e in self.edges:
            if len(e) != 2:
                raise ValidationError(f"edge {e!r} must have two endpoints")
            u, v = e
            if str(u) == str(v):
                raise ValidationError(f"self-loop at {u!r}")
            edges.append(edge_key(u, v))
        if len(set(edges)) != len(edges):
            raise ValidationError("duplicate edges")
        if inner & pins:
            raise ValidationError(f"vertices both inner and pinned: {sorted(inner & pins)}")
        vertices = inner | pins
        for u, v in edges:
            if u not in vertices or v not in vertices:
                raise ValidationError(f"edge {(u, v)} references an unknown vertex")
            if u in pins and v in pins:
                raise ValidationError(f"edge {(u, v)} joins two pinned vertices")
        object.__setattr__(self, "inner", inner)
        object.__setattr__(self, "pins", pins)
        object.__setattr__(self, "edges", frozenset(edges))

    @property
    def vertices(self) -> frozenset[str]:
        return self.inner | self.pins

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def degree(self, v: str) -> int:
        return sum(1 for e in self.edges if v in e)

    def neighbors(self, v: str) -> list[str]:
        return sorted(b if a == v else a for a, b in self.edges if v in (a, b))

    def has_edge(self, u: str, v: str) -> bool:
        return edge_key(u, v) in self.edges

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        for v in sorted(self.inner):
            g.add_node(v, pinned=False)
        for v in sorted(self.pins):
            g.add_node(v, pinned=True)
        g.add_edges_from(self.sorted_edges())
        return g

    def relabel(self, mapping: Mapping[str, str]) -> PinnedGraph:
        m = lambda v: mapping.get(v, v)  # noqa: E731
        return PinnedGraph(
            inner={m(v) for v in self.inner},
            pins={m(v) for v in self.pins},
            edges={(m(u), m(v)) for u, v in self.edges},
        )

    def with_edges(self, add: Iterable[Edge] = (), remove: Iterable[Edge] = ()) -> PinnedGraph:
        removed = {edge_key(*e) for e in remove}
        missing = removed - self.edges
        if missing:
            raise ValidationError(f"cannot remove absent edges {sorted(missing)}")
        return PinnedGraph(self.inner, self.pins, (self.edges - removed) | {edge_key(*e) for e in add})

    @classmethod
    def unpinned(cls, edges: Iterable[Edge], vertices: Iterable[str] = ()) -> PinnedGraph:
        edges = [edge_key(*e) for e in edges]
        vs = set(vertices) | {v for e in edges for v in e}
        return cls(inner=frozenset(vs), pins=frozenset(), edges=frozenset(edges))


@dataclass(frozen=True)
class Configuration:
    """Point positions keyed by vertex id (also used for dual configurations)."""

    points: Mapping[str, Point] = field(default_factory=dict)

    def __post_init__(self):
        pts = {}
        for k, p in self.points.items():
            x, y = (float(c) for c in p)
            if not (np.isfinite(x) and np.isfinite(y)):
                raise ValidationError(f"non-finite coordinate for {k!r}")
            pts[str(k)] = (x, y)
        object.__setattr__(self, "points", MappingProxyType(dict(sorted(pts.items()))))

    def __getitem__(self, v: str) -> np.ndarray:
        return np.asarray(self.points[v], dtype=float)

    def __contains__(self, v: str) -> bool:
        return v in self.points

    def __len__(self) -> int:
        return len(self.points)

    def keys(self):
        return self.points.keys()

    def array(self, ids: Iterable[str]) -> np.ndarray:
        return np.array([self.points[v] for v in ids], dtype=float).reshape(-1, 2)

    def diameter(self) -> float:
        if not self.points:
            return 0.0
        pts = np.array(list(self.points.values()))
        return float(np.max(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)))

    def updated(self, changes: Mapping[str, Point]) -> Configuration:
        pts = dict(self.points)
        pts.update(changes)
        return Configuration(pts)

    def restricted(self, ids: Iterable[str]) -> Configuration:
        return Configuration({v: self.points[v] for v in ids})

    @classmethod
    def from_array(cls, ids: Iterable[str], arr: np.ndarray) -> Configuration:
        arr = np.asarray(arr, dtype=float).reshape(-1, 2)
        return cls({v: (arr[k, 0], arr[k, 1]) for k, v in enumerate(ids)})


@dataclass(frozen=True)
class Framework:
    """A pinned graph together with a placement of all its vertices."""

    graph: PinnedGraph
    config: Configuration

    def __post_init__(self):
        vs = self.graph.vertices
        have = set(self.config.keys())
        if have != vs:
            missing, extra = sorted(vs - have), sorted(have - vs)
            raise ValidationError(f"configuration mismatch: missing {missing}, extra {extra}")
        for u, v in self.graph.edges:
            if np.allclose(self.config[u], self.config[v], rtol=0.0, atol=0.0):
                raise ValidationError(f"adjacent vertices {u!r} and {v!r} coincide")

    def position(self, v: str) -> np.ndarray:
        return self.config[v]


def contract_pins(g: PinnedGraph, ground: str = GROUND) -> nx.MultiGraph:
    """Identify all pins with a single vertex ``ground``.

    Parallel edges created by the contraction are kept; the dyad contracts to
    a doubled edge, which is the degenerate two-vertex rigidity circuit.
    """
    if not g.pins:
        raise ValidationError("pinned graph has no pins to contract")
    if ground in g.vertices:
        raise ValidationError(f"ground id {ground!r} collides with a vertex id")
    h = nx.MultiGraph()
    h.add_nodes_from(sorted(g.inner))
    h.add_node(ground)
    for u, v in g.sorted_edges():
        h.add_edge(ground if u in g.pins else u, ground if v in g.pins else v, key=(u, v))
    return h


def induced_pinned_subgraph(g: PinnedGraph, vs: Iterable[str]) -> PinnedGraph:
    vs = set(vs)
    unknown = vs - g.vertices
    if unknown:
        raise ValidationError(f"unknown vertices {sorted(unknown)}")
    return PinnedGraph(
        inner=g.inner & vs,
        pins=g.pins & vs,
        edges={e for e in g.edges if e[0] in vs and e[1] in vs},
    )


DYAD = PinnedGraph(inner={"a"}, pins={"p1", "p2"}, edges={("a", "p1"), ("a", "p2")})
TRIAD = PinnedGraph(
    inner={"a", "b", "c"},
    pins={"p1", "p2", "p3"},
    edges={("a", "b"), ("b", "c"), ("a", "c"), ("a", "p1"), ("b", "p2"), ("c", "p3")},
)
FOURBAR = PinnedGraph(inner={"a", "b"}, pins={"p1", "p2"}, edges={("p1", "a"), ("a", "b"), ("b", "p2")})
K4 = PinnedGraph.unpinned([("1", "2"), ("1", "3"), ("1", "4"), ("2", "3"), ("2", "4"), ("3", "4")])
STACKED_DYADS = PinnedGraph(
    inner={"a", "b"},
    pins={"p1", "p2", "p3"},
    edges={("a", "p1"), ("a", "p2"), ("b", "a"), ("b", "p3")},
)
# K3,3 plus one edge contracts to a non-planar rigidity circuit: one side of the
# bipartition is split into three pins.
K33_ASSUR = PinnedGraph(
    inner={"A1", "A2", "A3", "B1", "B2"},
    pins={"p1", "p2", "p3"},
    edges={
        ("A1", "B1"), ("A2", "B1"), ("A3", "B1"),
        ("A1", "B2"), ("A2", "B2"), ("A3", "B2"),
        ("A1", "p1"), ("A2", "p2"), ("A3", "p3"),
        ("A1", "A2"),
    },
)

FIXTURES: dict[str, PinnedGraph] = {
    "dyad": DYAD,
    "triad": TRIAD,
    "fourbar": FOURBAR,
    "k4": K4,
    "stacked_dyads": STACKED_DYADS,
    "k33_assur": K33_ASSUR,
}
