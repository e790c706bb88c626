"""Assur graph recognition, the Assur scheme, and the stress-plus-motion test."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import networkx as nx
import numpy as np

from .counts import contracted_is_circuit, pinned_framework_conditions
from .model import Framework, PinnedGraph, ValidationError, induced_pinned_subgraph
from .numeric import (
    DEFAULT_TOL,
    Tolerance,
    build_rigidity_matrix,
    first_order_motions,
    motion_matrix,
    null_basis,
    random_generic_configuration,
    self_stresses,
    stress_matrix,
)

LEAK = 1e-6


class NotIsostaticError(ValidationError):
    pass


class InternalConsistencyError(AssertionError):
    """A geometric certificate contradicted the combinatorial test."""


def is_assur(g: PinnedGraph) -> bool:
    if not g.pins or not g.inner:
        return False
    return pinned_framework_conditions(g).satisfied and contracted_is_circuit(g)


def _require_isostatic(g: PinnedGraph) -> None:
    report = pinned_framework_conditions(g)
    if not report.satisfied:
        raise NotIsostaticError(f"graph is not pinned isostatic ({report.reason})")


def minimal_isostatic_witness(g: PinnedGraph) -> frozenset[str] | None:
    """Exhaustive search for a proper inner subset carrying |E'| >= 2|I'| edges.

    Pins are always included in the induced subgraph since dropping them only
    removes edges. Returns the smallest such subset, or None when g is minimal.
    """
    inner = sorted(g.inner)
    if len(inner) > 20:
        raise ValueError("exhaustive minimality check is limited to 20 inner vertices")
    for size in range(1, len(inner)):
        for subset in itertools.combinations(inner, size):
            sub = induced_pinned_subgraph(g, set(subset) | g.pins)
            if len(sub.edges) >= 2 * size:
                return frozenset(subset)
    return None


def all_inner_move(g: PinnedGraph, seed: int = 0, resample: bool = True) -> bool:
    """Generic motion space reaches every inner vertex (vacuous with no inner vertices)."""
    if not g.inner:
        return True
    attempts = [seed, seed + 7919] if resample else [seed]
    for s in attempts:
        try:
            c = random_generic_configuration(g, s)
        except RuntimeError:
            continue
        f = Framework(g, c)
        basis = null_basis(build_rigidity_matrix(f).matrix)
        if basis.shape[1] == 0:
            continue
        blocks = np.linalg.norm(basis.reshape(len(g.inner), 2, -1), axis=(1, 2))
        if blocks.min() > LEAK * blocks.max():
            return True
    return False


def _delete_vertex(g: PinnedGraph, v: str) -> PinnedGraph:
    return PinnedGraph(g.inner - {v}, g.pins - {v}, {e for e in g.edges if v not in e})


@dataclass(frozen=True)
class CharacterizationReport:
    minimal: bool
    circuit: bool
    vertex_deletion: bool
    edge_deletion: bool
    minimality_witness: frozenset[str] | None = None

    @property
    def values(self) -> tuple[bool, bool, bool, bool]:
        return (self.minimal, self.circuit, self.vertex_deletion, self.edge_deletion)

    @property
    def agree(self) -> bool:
        return len(set(self.values)) == 1


def characterization_crosscheck(g: PinnedGraph, seed: int = 0) -> CharacterizationReport:
    """Evaluate the four Assur characterizations independently of each other."""
    _require_isostatic(g)
    witness = minimal_isostatic_witness(g)
    circuit = contracted_is_circuit(g)
    if len(g.inner) == 1 and g.degree(next(iter(g.inner))) == 2:
        vertex_ok = True
    else:
        vertex_ok = all(
            all_inner_move(_delete_vertex(g, v), seed + k) for k, v in enumerate(sorted(g.vertices))
        )
    edge_ok = all(
        all_inner_move(g.with_edges(remove=[e]), seed + k) for k, e in enumerate(g.sorted_edges())
    )
    return CharacterizationReport(witness is None, circuit, vertex_ok, edge_ok, witness)


def two_out_orientation(g: PinnedGraph) -> dict[str, list[str]]:
    """Orient every edge away from an inner endpoint with each inner out-degree <= 2.

    Pins never receive an out-edge. This is the pebble game with two pebbles
    per inner vertex and none on pins.
    """
    out: dict[str, list[str]] = {v: [] for v in sorted(g.vertices)}
    cap = {v: (2 if v in g.inner else 0) for v in out}

    def free(v):
        return cap[v] - len(out[v])

    def gather(start, keep):
        parent = {start: None}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in out[x]:
                if y in parent:
                    continue
                parent[y] = x
                if y not in keep and free(y) > 0:
                    node = y
                    while parent[node] is not None:
                        prev = parent[node]
                        out[prev].remove(node)
                        out[node].append(prev)
                        node = prev
                    return True
                stack.append(y)
        return False

    for u, v in g.sorted_edges():
        for a, b in ((u, v), (v, u)):
            if a in g.inner and (free(a) > 0 or gather(a, (a, b))):
                out[a].append(b)
                break
        else:
            raise NotIsostaticError(f"edge {(u, v)} overloads its endpoints")
    return out


@dataclass(frozen=True)
class AssurScheme:
    """Assur components (bottom first) and the dependency DAG between them.

    ``order`` holds (lower, upper) index pairs: the upper component uses inner
    vertices of the lower one as pins.
    """

    components: tuple[PinnedGraph, ...]
    order: tuple[tuple[int, int], ...] = ()
    ground: frozenset[str] = field(default_factory=frozenset)

    def recompose(self) -> PinnedGraph:
        inner = frozenset().union(*(c.inner for c in self.components))
        edges = frozenset().union(*(c.edges for c in self.components))
        pins = frozenset().union(*(c.pins for c in self.components)) - inner
        return PinnedGraph(inner, pins | self.ground, edges)

    def dag(self) -> nx.DiGraph:
        d = nx.DiGraph()
        d.add_nodes_from(range(len(self.components)))
        d.add_edges_from(self.order)
        return d

    def canonical(self, mapping: Mapping[str, str] | None = None) -> tuple[frozenset, frozenset]:
        """Label-independent form; ``mapping`` renames vertices first."""
        m = (lambda v: mapping.get(v, v)) if mapping else (lambda v: v)
        keys = []
        for c in self.components:
            keys.append((frozenset(m(v) for v in c.inner), frozenset(frozenset(map(m, e)) for e in c.edges)))
        order = frozenset((keys[a][0], keys[b][0]) for a, b in self.order)
        return frozenset(keys), order

    def to_dict(self) -> dict:
        return {
            "components": [
                {"inner": sorted(c.inner), "pins": sorted(c.pins), "edges": [list(e) for e in c.sorted_edges()]}
                for c in self.components
            ],
            "order": [list(p) for p in self.order],
        }


def decompose(g: PinnedGraph) -> AssurScheme:
    """Split a pinned isostatic graph into its unique Assur components.

    With every inner vertex owning exactly two out-edges, a set of inner
    vertices closed under reachability spans exactly 2|S| edges, so the
    strongly connected components of the inner digraph are the Assur
    components and the condensation is the scheme.
    """
    _require_isostatic(g)
    out = two_out_orientation(g)
    d = nx.DiGraph()
    d.add_nodes_from(sorted(g.inner))
    d.add_edges_from((u, v) for u in g.inner for v in out[u] if v in g.inner)
    cond = nx.condensation(d)
    members = {n: frozenset(cond.nodes[n]["members"]) for n in cond.nodes}
    # dependencies point from lower (used as pins) to upper
    deps = nx.DiGraph()
    deps.add_nodes_from(cond.nodes)
    deps.add_edges_from((b, a) for a, b in cond.edges)
    ordered = list(nx.lexicographical_topological_sort(deps, key=lambda n: min(members[n])))
    index = {n: k for k, n in enumerate(ordered)}
    comps = []
    for n in ordered:
        inner = members[n]
        edges = {tuple(sorted((u, v))) for u in inner for v in out[u]}
        pins = {v for e in edges for v in e} - inner
        comps.append(PinnedGraph(inner, pins, edges))
    order = tuple(sorted((index[a], index[b]) for a, b in deps.edges))
    isolated = g.pins - frozenset().union(*(c.pins for c in comps))
    return AssurScheme(tuple(comps), order, frozenset(isolated))


@dataclass(frozen=True)
class SufficiencyReport:
    holds: bool
    stress_dim: int
    motion_dim: int
    stress_margin: float
    motion_margin: float


def stress_motion_report(f: Framework, tol: Tolerance = DEFAULT_TOL) -> SufficiencyReport:
    stresses = self_stresses(f, tol)
    motions = first_order_motions(f, tol)
    edges = f.graph.sorted_edges()
    inner = sorted(f.graph.inner)
    s_margin = m_margin = 0.0
    if len(stresses) == 1:
        lam = np.abs(stress_matrix(stresses, edges)[:, 0])
        s_margin = float(lam.min() / lam.max())
    if len(motions) == 1:
        speeds = np.linalg.norm(motion_matrix(motions, inner)[:, 0].reshape(-1, 2), axis=1)
        m_margin = float(speeds.min() / speeds.max())
    holds = len(stresses) == 1 and len(motions) == 1 and s_margin > LEAK and m_margin > LEAK
    return SufficiencyReport(holds, len(stresses), len(motions), s_margin, m_margin)


def verify_sufficiency(f: Framework, tol: Tolerance = DEFAULT_TOL) -> bool:
    """Unique stress nonzero on all bars and unique motion moving every inner vertex.

    A positive answer certifies that the graph is Assur; a disagreement with
    :func:`is_assur` is an implementation fault and raises.
    """
    report = stress_motion_report(f, tol)
    if report.holds and not is_assur(f.graph):
        raise InternalConsistencyError("stress/motion certificate on a graph that is_assur rejects")
    return report.holds
