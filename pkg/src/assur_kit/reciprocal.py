"""Planar embeddings, dual graphs and Maxwell-Cremona reciprocal diagrams.

Rotations are stored clockwise. A face is traced by following half-edge
(u, v) with (v, w), where w is the neighbour counter-clockwise of u around v.
For an edge i-j the dual edge joins face(i, j) to face(j, i) and the
reciprocal satisfies q[face(i, j)] - q[face(j, i)] = lambda_ij (p_i - p_j).
Summed around a vertex this telescopes, so closure is equilibrium.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np
import scipy.linalg

from .model import Configuration, Edge, Framework, PinnedGraph, ValidationError, edge_key
from .numeric import DEFAULT_TOL, Motion, SelfStress, Tolerance, first_order_motions, motion_matrix, self_stresses

HalfEdge = tuple[str, str]


class NotPlanarError(ValueError):
    def __init__(self, message: str, witness: Sequence[Edge] = ()):
        super().__init__(message)
        self.witness = tuple(witness)


class ClosureError(ValueError):
    pass


@dataclass(frozen=True)
class NotPlanar:
    witness: tuple[Edge, ...]


@dataclass(frozen=True)
class PlanarEmbedding:
    rotation: Mapping[str, tuple[str, ...]]
    faces: tuple[tuple[HalfEdge, ...], ...]
    outer_face: int = 0
    face_of: Mapping[HalfEdge, int] = field(default_factory=dict, compare=False)

    @property
    def face_names(self) -> list[str]:
        return [face_name(k) for k in range(len(self.faces))]

    @property
    def edges(self) -> list[Edge]:
        return sorted({edge_key(u, v) for u, nbrs in self.rotation.items() for v in nbrs})

    def face_vertices(self, k: int) -> list[str]:
        return [u for u, _ in self.faces[k]]

    def dual_ends(self, e: Edge) -> tuple[int, int]:
        i, j = edge_key(*e)
        return self.face_of[(i, j)], self.face_of[(j, i)]

    def euler_characteristic(self) -> int:
        return len(self.rotation) - len(self.edges) + len(self.faces)


def face_name(k: int) -> str:
    return f"F{k}"


def embedding_from_rotation(rotation: Mapping[str, Sequence[str]]) -> PlanarEmbedding:
    """Trace faces of a clockwise rotation system."""
    rot = {v: tuple(nbrs) for v, nbrs in sorted(rotation.items())}
    for v, nbrs in rot.items():
        for w in nbrs:
            if v not in rot.get(w, ()):
                raise ValidationError(f"rotation is not symmetric at {v}-{w}")

    def nxt(u, v):
        around = rot[v]
        k = around.index(u)
        return v, around[k - 1]

    face_of: dict[HalfEdge, int] = {}
    faces = []
    for u in rot:
        for v in rot[u]:
            if (u, v) in face_of:
                continue
            k = len(faces)
            walk = []
            h = (u, v)
            while h not in face_of:
                face_of[h] = k
                walk.append(h)
                h = nxt(*h)
            faces.append(tuple(walk))
    outer = max(range(len(faces)), key=lambda k: (len(faces[k]), -k)) if faces else 0
    return PlanarEmbedding(rot, tuple(faces), outer, face_of)


def _as_nx(g) -> nx.Graph:
    if isinstance(g, PinnedGraph):
        return g.to_networkx()
    if isinstance(g, nx.Graph) and not g.is_multigraph():
        return g
    raise TypeError("planar_embed expects a simple graph")


def planar_embed(g) -> PlanarEmbedding | NotPlanar:
    h = _as_nx(g)
    if h.number_of_nodes() == 0 or not nx.is_connected(h):
        raise ValidationError("planar_embed needs a connected graph")
    ok, emb = nx.check_planarity(h, counterexample=True)
    if not ok:
        return NotPlanar(tuple(sorted(edge_key(u, v) for u, v in emb.edges)))
    return embedding_from_rotation({v: list(emb.neighbors_cw_order(v)) for v in emb.nodes})


def require_embedding(g) -> PlanarEmbedding:
    e = planar_embed(g)
    if isinstance(e, NotPlanar):
        raise NotPlanarError("graph is not planar", e.witness)
    return e


def dual_graph(e: PlanarEmbedding) -> nx.MultiGraph:
    d = nx.MultiGraph()
    d.add_nodes_from(e.face_names)
    for edge in e.edges:
        h, k = e.dual_ends(edge)
        d.add_edge(face_name(h), face_name(k), key=edge)
    return d


def _walk(nodes: Sequence[str], relations: Iterable[tuple[str, str, np.ndarray]], root: str,
          root_pos=(0.0, 0.0)) -> tuple[dict[str, np.ndarray], float]:
    """Positions with pos[a] - pos[b] = vec along a BFS tree; returns max misfit on all relations."""
    rel = list(relations)
    adj: dict[str, list[tuple[str, np.ndarray]]] = {n: [] for n in nodes}
    for a, b, vec in rel:
        adj[a].append((b, -vec))
        adj[b].append((a, vec))
    pos = {root: np.asarray(root_pos, float)}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y, vec in adj[x]:
            # pos[y] - pos[x] = vec
            if y not in pos:
                pos[y] = pos[x] + vec
                queue.append(y)
    if len(pos) != len(nodes):
        raise ValidationError("relations do not connect all nodes")
    misfit = max((float(np.linalg.norm(pos[a] - pos[b] - vec)) for a, b, vec in rel), default=0.0)
    return pos, misfit


def _diameter(points: Iterable[np.ndarray]) -> float:
    pts = np.array(list(points))
    if len(pts) < 2:
        return 0.0
    return float(np.max(np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)))


@dataclass(frozen=True)
class ReciprocalDiagram:
    dual_config: Configuration
    framework: Framework
    stress: SelfStress
    embedding: PlanarEmbedding
    scale: float = 1.0
    closure_residual: float = 0.0

    def dual_edge(self, e: Edge) -> tuple[str, str]:
        h, k = self.embedding.dual_ends(e)
        return face_name(h), face_name(k)


def full_equilibrium_residual(f: Framework, s: SelfStress) -> float:
    force = {v: np.zeros(2) for v in f.graph.vertices}
    for (i, j), lam in s.values.items():
        d = f.config[i] - f.config[j]
        force[i] += lam * d
        force[j] -= lam * d
    return max(float(np.linalg.norm(x)) for x in force.values())


def reciprocal_from_stress(f: Framework, s: SelfStress, e: PlanarEmbedding | None = None,
                           closure_rel: float = 1e-7) -> ReciprocalDiagram:
    """Dual configuration by walking a spanning tree of the dual graph."""
    e = require_embedding(f.graph) if e is None else e
    if set(e.edges) != f.graph.edges:
        raise ValidationError("embedding does not match the framework's edges")
    lam_scale = max((abs(v) for v in s.values.values()), default=0.0)
    p_scale = f.config.diameter()
    if full_equilibrium_residual(f, s) > 1e-8 * max(lam_scale * p_scale, 1e-300):
        raise ValidationError("stress is not in equilibrium at every vertex")
    relations = []
    for edge in e.edges:
        i, j = edge
        h, k = e.dual_ends(edge)
        relations.append((face_name(h), face_name(k), s[edge] * (f.config[i] - f.config[j])))
    pos, misfit = _walk(e.face_names, relations, face_name(e.outer_face))
    scale = max(_diameter(pos.values()), lam_scale * p_scale * 1e-12)
    if misfit > closure_rel * scale:
        raise ClosureError(f"dual closure failed: misfit {misfit:.3e} vs diameter {scale:.3e}")
    q = Configuration({n: tuple(x) for n, x in pos.items()})
    return ReciprocalDiagram(q, f, s, e, 1.0, misfit)


def stress_from_reciprocal(f: Framework, r: ReciprocalDiagram, parallel_tol: float = 1e-8) -> SelfStress:
    """Solve lambda_ij (p_i - p_j) = q_h - q_k edge by edge."""
    values = {}
    q = r.dual_config
    for edge in f.graph.sorted_edges():
        i, j = edge
        d = f.config[i] - f.config[j]
        nd = float(np.linalg.norm(d))
        if nd == 0.0:
            raise ValidationError(f"primal edge {edge} has zero length")
        h, k = r.dual_edge(edge)
        w = q[h] - q[k]
        # dual edges at rounding level belong to unstressed bars and carry no direction
        nw = float(np.linalg.norm(w))
        if nw > q.diameter() * 1e-9 and abs(d[0] * w[1] - d[1] * w[0]) > parallel_tol * nd * nw:
            raise ValidationError(f"dual edge of {edge} is not parallel to it")
        values[edge] = float(np.dot(d, w) / nd**2)
    return SelfStress(values)


def reciprocal_of_dual(e: PlanarEmbedding, q: Mapping[str, np.ndarray], omega: Mapping[Edge, float],
                       root: str, root_pos=(0.0, 0.0)) -> tuple[dict[str, np.ndarray], float]:
    """Primal positions from a stressed dual: p_i - p_j = omega_e (q[face(i,j)] - q[face(j,i)])."""
    relations = []
    for edge in e.edges:
        i, j = edge
        h, k = e.dual_ends(edge)
        relations.append((i, j, omega[edge] * (np.asarray(q[face_name(h)]) - np.asarray(q[face_name(k)]))))
    return _walk(sorted(e.rotation), relations, root, root_pos)


@dataclass(frozen=True)
class BowedFramework:
    framework: Framework
    crossings: Mapping[str, tuple[Edge, Edge]]
    chains: Mapping[Edge, tuple[Edge, ...]]
    original: Framework


def _intersect(f: Framework, e1: Edge, e2: Edge) -> tuple[np.ndarray, float, float]:
    a1, b1 = f.config[e1[0]], f.config[e1[1]]
    a2, b2 = f.config[e2[0]], f.config[e2[1]]
    d1, d2 = b1 - a1, b2 - a2
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) <= 1e-12 * np.linalg.norm(d1) * np.linalg.norm(d2):
        raise ValidationError(f"edges {e1} and {e2} are parallel")
    r = a2 - a1
    t = (r[0] * d2[1] - r[1] * d2[0]) / den
    u = (r[0] * d1[1] - r[1] * d1[0]) / den
    x = a1 + t * d1
    scale = max(np.linalg.norm(d1), np.linalg.norm(d2))
    for v in (*e1, *e2):
        if np.linalg.norm(x - f.config[v]) <= 1e-9 * scale:
            raise ValidationError(f"crossing of {e1} and {e2} falls on vertex {v!r}")
    return x, float(t), float(u)


def bow_insert_crossings(f: Framework, crossings: Sequence[tuple[Edge, Edge]]) -> BowedFramework:
    """Insert a 4-valent vertex at the intersection of each declared pair of lines."""
    g = f.graph
    points = dict(f.config.points)
    along: dict[Edge, list[tuple[float, str]]] = {}
    cross: dict[str, tuple[Edge, Edge]] = {}
    taken = set(g.vertices)
    k = 0
    for e1, e2 in crossings:
        e1, e2 = edge_key(*e1), edge_key(*e2)
        for e in (e1, e2):
            if e not in g.edges:
                raise ValidationError(f"crossing references absent edge {e}")
        if set(e1) & set(e2):
            raise ValidationError(f"edges {e1} and {e2} share a vertex")
        x, t, u = _intersect(f, e1, e2)
        while f"x{k}" in taken:
            k += 1
        name = f"x{k}"
        taken.add(name)
        points[name] = tuple(x)
        cross[name] = (e1, e2)
        along.setdefault(e1, []).append((t, name))
        along.setdefault(e2, []).append((u, name))
    edges = set(g.edges)
    chains: dict[Edge, tuple[Edge, ...]] = {}
    for e in g.sorted_edges():
        if e not in along:
            chains[e] = (e,)
            continue
        seq = [e[0]] + [n for _, n in sorted(along[e])] + [e[1]]
        edges.discard(e)
        chain = tuple(edge_key(a, b) for a, b in zip(seq, seq[1:]))
        edges.update(chain)
        chains[e] = chain
    bowed = PinnedGraph(g.inner | set(cross), g.pins, edges)
    return BowedFramework(Framework(bowed, Configuration(points)), cross, chains, f)


@dataclass(frozen=True)
class TransferReport:
    stress_dims: tuple[int, int]
    motion_dims: tuple[int, int]
    angle_residual: float
    structure_ok: bool

    @property
    def passed(self) -> bool:
        return (self.structure_ok and self.stress_dims[0] == self.stress_dims[1]
                and self.motion_dims[0] == self.motion_dims[1] and self.angle_residual <= 1e-8)


def _bow_structure_ok(fb: BowedFramework, tol: float = 1e-9) -> bool:
    f, b = fb.original, fb.framework
    scale = max(f.config.diameter(), 1e-300)
    for e, chain in fb.chains.items():
        ends = [v for edge in chain for v in edge]
        if chain[0][0] not in e and chain[0][1] not in e:
            return False
        if set(e) - set(ends):
            return False
        d = f.config[e[1]] - f.config[e[0]]
        for v in ends:
            r = b.config[v] - f.config[e[0]]
            if abs(d[0] * r[1] - d[1] * r[0]) > tol * np.linalg.norm(d) * scale:
                return False
    return set(b.graph.edges) == {x for chain in fb.chains.values() for x in chain}


def motions_transfer_check(f: Framework, fb: BowedFramework, tol: Tolerance = DEFAULT_TOL) -> TransferReport:
    """Compare stress and motion spaces of a framework and its Bowed version."""
    structure = _bow_structure_ok(fb) and fb.original == f
    s0, s1 = len(self_stresses(f, tol)), len(self_stresses(fb.framework, tol))
    m0 = first_order_motions(f, tol)
    m1 = first_order_motions(fb.framework, tol)
    inner = sorted(f.graph.inner)
    a = motion_matrix(m0, inner)
    b = motion_matrix(m1, inner)
    if a.shape[1] == 0 and b.shape[1] == 0:
        residual = 0.0
    elif a.shape[1] != b.shape[1] or np.linalg.matrix_rank(b) != b.shape[1]:
        residual = 1.0
    else:
        residual = float(np.max(np.sin(scipy.linalg.subspace_angles(a, b))))
    return TransferReport((s0, s1), (len(m0), len(m1)), residual, structure)


@dataclass(frozen=True)
class ParallelDrawing:
    points: Configuration
    base: Framework


def check_parallel(pd: ParallelDrawing, tol: float = 1e-8) -> float:
    worst = 0.0
    scale = max(pd.base.config.diameter(), pd.points.diameter(), 1e-300)
    for i, j in pd.base.graph.edges:
        d = pd.base.config[i] - pd.base.config[j]
        w = pd.points[i] - pd.points[j]
        worst = max(worst, abs(d[0] * w[1] - d[1] * w[0]) / scale**2)
    if worst > tol:
        raise ValidationError(f"drawing is not parallel (residual {worst:.3e})")
    return worst


def rot90(u: np.ndarray) -> np.ndarray:
    return np.array([-u[1], u[0]])


def motion_from_parallel_drawing(f: Framework, pd: ParallelDrawing, tol: float = 1e-8) -> Motion:
    """Rotate parallel-drawing displacements by 90 degrees into a first-order motion."""
    check_parallel(pd, tol)
    scale = max(f.config.diameter(), 1e-300)
    for v in f.graph.pins:
        if np.linalg.norm(pd.points[v] - f.config[v]) > tol * scale:
            raise ValidationError(f"parallel drawing moves pinned vertex {v!r}")
    return Motion({v: tuple(rot90(pd.points[v] - f.config[v])) for v in sorted(f.graph.inner)})


def stresses_unpinned(f: Framework, tol: Tolerance = DEFAULT_TOL) -> list[SelfStress]:
    """Self-stresses with equilibrium required at every vertex, pins included."""
    g = f.graph
    free = Framework(PinnedGraph(g.vertices, frozenset(), g.edges), f.config)
    return self_stresses(free, tol)
