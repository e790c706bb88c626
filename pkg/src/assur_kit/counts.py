"""Combinatorial rigidity: the (2,3) pebble game and the counts built on it.

Pinned graphs are counted by adding an isostatic fan triangulation on the
pins (path p1..pm plus p1 to every other pin) and running the ordinary
(2,3) game with the fan inserted first. The fan is independent, so every
G edge it later rejects is dependent relative to a rigid ground.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import networkx as nx

from .model import Edge, PinnedGraph, ValidationError, contract_pins, induced_pinned_subgraph


class PebbleGame:
    """Incremental (2,3) pebble game on a multigraph.

    ``insert`` returns True when the edge is independent of those already
    accepted. After a rejection, ``failure_region`` holds the vertex set that
    witnesses the dependency (it spans 2|R| - 3 accepted edges).
    """

    K, L = 2, 3

    def __init__(self, vertices: Iterable[Hashable] = ()):
        self.out: dict[Hashable, list[Hashable]] = {}
        self.failure_region: frozenset | None = None
        for v in vertices:
            self.add_vertex(v)

    def add_vertex(self, v: Hashable) -> None:
        self.out.setdefault(v, [])

    def pebbles(self, v: Hashable) -> int:
        return self.K - len(self.out[v])

    def _reach(self, roots: Iterable[Hashable]) -> set:
        seen = set(roots)
        stack = list(seen)
        while stack:
            x = stack.pop()
            for y in self.out[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return seen

    def _gather(self, start: Hashable, keep: tuple) -> bool:
        # DFS for a free pebble away from ``keep``; reversing the path moves it to ``start``.
        parent = {start: None}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in self.out[x]:
                if y in parent:
                    continue
                parent[y] = x
                if y not in keep and self.pebbles(y) > 0:
                    node = y
                    while parent[node] is not None:
                        prev = parent[node]
                        self.out[prev].remove(node)
                        self.out[node].append(prev)
                        node = prev
                    return True
                stack.append(y)
        return False

    def insert(self, u: Hashable, v: Hashable) -> bool:
        self.add_vertex(u)
        self.add_vertex(v)
        if u == v:
            raise ValueError("self-loops are not allowed")
        self.failure_region = None
        while self.pebbles(u) + self.pebbles(v) < self.L + 1:
            target = u if self.pebbles(u) < self.K else v
            if not self._gather(target, (u, v)):
                self.failure_region = frozenset(self._reach((u, v)))
                return False
        if self.pebbles(u) == 0:
            u, v = v, u
        self.out[u].append(v)
        return True


@dataclass(frozen=True)
class CountReport:
    satisfied: bool
    witness: PinnedGraph | None = None
    counts: tuple[int, int, int] | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        w = None
        if self.witness is not None:
            w = {
                "inner": sorted(self.witness.inner),
                "pins": sorted(self.witness.pins),
                "edges": [list(e) for e in self.witness.sorted_edges()],
            }
        return {
            "satisfied": self.satisfied,
            "witness": w,
            "counts": list(self.counts) if self.counts else None,
            "reason": self.reason,
        }


def _edge_list(g) -> tuple[list, list]:
    if isinstance(g, PinnedGraph):
        return sorted(g.vertices), g.sorted_edges()
    if isinstance(g, (nx.Graph, nx.MultiGraph)):
        vertices = list(g.nodes)
        edges = [(u, v) for u, v, *_ in g.edges]
        return vertices, edges
    edges = [tuple(e) for e in g]
    return sorted({v for e in edges for v in e}, key=str), edges


def ground_fan(pins: Sequence[str]) -> list[Edge]:
    """Path p1..pm plus bars from p1 to every other pin: 2m - 3 edges for m >= 2."""
    pins = list(pins)
    if len(pins) < 2:
        return []
    path = [(pins[i], pins[i + 1]) for i in range(len(pins) - 1)]
    spokes = [(pins[0], p) for p in pins[2:]]
    return path + spokes


def laman_check(g) -> CountReport:
    """Laman's conditions for an unpinned (multi)graph."""
    vertices, edges = _edge_list(g)
    if not edges:
        raise ValidationError("laman_check needs at least one edge")
    game = PebbleGame(vertices)
    for u, v in edges:
        if not game.insert(u, v):
            region = game.failure_region
            sub = [e for e in edges if e[0] in region and e[1] in region]
            witness = PinnedGraph.unpinned({tuple(map(str, e)) for e in sub}, map(str, region))
            return CountReport(False, witness, (len(sub), len(region), 0), "subset exceeds 2|V|-3")
    n, m = len(vertices), len(edges)
    if m != 2 * n - 3:
        witness = PinnedGraph.unpinned({tuple(map(str, e)) for e in edges}, map(str, vertices))
        return CountReport(False, witness, (m, n, 0), "|E| != 2|V|-3")
    return CountReport(True, None, (m, n, 0))


def generic_rank_unpinned(g) -> int:
    vertices, edges = _edge_list(g)
    game = PebbleGame(vertices)
    return sum(game.insert(u, v) for u, v in edges)


def is_rigidity_circuit(g, allow_multi: bool = False) -> bool:
    """True iff the edge set is a (2,3) circuit: |C| = 2|V(C)| - 2, proper subsets sparse."""
    _, edges = _edge_list(g)
    if not edges:
        raise ValidationError("a circuit needs at least one edge")
    keys = [frozenset(e) for e in edges]
    if not allow_multi and len(set(keys)) != len(keys):
        return False
    touched = {v for e in edges for v in e}
    if len(edges) != 2 * len(touched) - 2:
        return False
    for skip in range(len(edges)):
        game = PebbleGame(touched)
        for k, (u, v) in enumerate(edges):
            if k != skip and not game.insert(u, v):
                return False
    return True


def _pinned_game(g: PinnedGraph) -> tuple[PebbleGame, list[Edge], Edge | None]:
    game = PebbleGame(sorted(g.vertices))
    for u, v in ground_fan(sorted(g.pins)):
        game.insert(u, v)
    accepted = []
    for e in g.sorted_edges():
        if game.insert(*e):
            accepted.append(e)
        else:
            return game, accepted, e
    return game, accepted, None


def pinned_rank(g: PinnedGraph) -> int:
    """Generic rank of the pinned rigidity matrix (pin columns dropped)."""
    game = PebbleGame(sorted(g.vertices))
    for u, v in ground_fan(sorted(g.pins)):
        game.insert(u, v)
    return sum(game.insert(*e) for e in g.sorted_edges())


def independent_edges(g: PinnedGraph) -> list[Edge]:
    game = PebbleGame(sorted(g.vertices))
    for u, v in ground_fan(sorted(g.pins)):
        game.insert(u, v)
    return [e for e in g.sorted_edges() if game.insert(*e)]


def _bound(n_inner: int, n_pins: int) -> int:
    if n_pins >= 2:
        return 2 * n_inner
    if n_pins == 1:
        return 2 * n_inner - 1
    return 2 * n_inner - 3


def pinned_framework_conditions(g: PinnedGraph) -> CountReport:
    """|E| = 2|I| and every subgraph obeys the pinned sparsity bounds."""
    game, _, rejected = _pinned_game(g)
    if rejected is not None:
        witness = induced_pinned_subgraph(g, game.failure_region)
        counts = (len(witness.edges), len(witness.inner), len(witness.pins))
        return CountReport(False, witness, counts, f"subgraph exceeds its bound {_bound(*counts[1:])}")
    counts = (len(g.edges), len(g.inner), len(g.pins))
    if len(g.edges) != 2 * len(g.inner):
        return CountReport(False, g, counts, "|E| != 2|I|")
    if len(g.pins) < 2:
        return CountReport(False, g, counts, "fewer than two pins")
    return CountReport(True, None, counts)


def is_pinned_isostatic(g: PinnedGraph) -> bool:
    return pinned_framework_conditions(g).satisfied


def generic_dof(g: PinnedGraph) -> int:
    return 2 * len(g.inner) - pinned_rank(g)


def contracted_is_circuit(g: PinnedGraph) -> bool:
    return is_rigidity_circuit(contract_pins(g), allow_multi=True)
