"""Singular realizations of Assur graphs carrying a full self-stress and a full motion.

The constructive route works on the extended graph G^ = G plus a fan
triangulation of the pins, embedded so the fan triangles are faces. Its dual
is the dual of the pin-contracted circuit plus a 3-valent tree inside the
ground face K. A generic stressed dual with the tree inserted has a 2-dim
stress space; mixing the two stresses and taking reciprocals yields the
configuration and, from a second mix, a parallel drawing whose rotated
displacements are the motion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import networkx as nx
import numpy as np

from .assur import LEAK, is_assur, stress_motion_report
from .counts import ground_fan
from .model import Configuration, Edge, Framework, PinnedGraph, ValidationError, edge_key
from .numeric import (
    DEFAULT_TOL,
    Motion,
    SelfStress,
    Tolerance,
    equilibrium_residual,
    first_order_motions,
    matrix_for,
    motion_matrix,
    motion_residual,
    null_basis,
    pure_condition_value,
    random_generic_configuration,
    self_stresses,
    stress_matrix,
)
from .reciprocal import (
    NotPlanarError,
    PlanarEmbedding,
    ParallelDrawing,
    _walk,
    bow_insert_crossings,
    embedding_from_rotation,
    face_name,
    motion_from_parallel_drawing,
    reciprocal_of_dual,
)

HUB = "p*"


class NotAssurError(ValidationError):
    pass


class ConstructionError(RuntimeError):
    """The pipeline could not reach the required margins within its retry budget."""


@dataclass(frozen=True)
class SingularCertificate:
    framework: Framework
    stress: SelfStress
    motion: Motion
    residuals: Mapping[str, float]
    margins: Mapping[str, float]
    stress_dim: int = 1
    motion_dim: int = 1
    stages: Mapping[str, object] = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        f = self.framework
        return {
            "config": {v: list(xy) for v, xy in f.config.points.items()},
            "stress": {f"{u}-{v}": self.stress[(u, v)] for u, v in f.graph.sorted_edges()},
            "velocity": {v: list(xy) for v, xy in self.motion.velocity.items()},
            "stress_dim": self.stress_dim,
            "motion_dim": self.motion_dim,
            "margins": dict(self.margins),
            "residuals": dict(self.residuals),
        }


# -- extended graph -----------------------------------------------------------

@dataclass(frozen=True)
class ExtendedGraph:
    """G plus the pin fan, with an embedding whose fan triangles are faces."""

    graph: PinnedGraph
    pins: tuple[str, ...]
    fan: tuple[Edge, ...]
    embedding: PlanarEmbedding
    triangles: tuple[int, ...]

    @property
    def tree_edges(self) -> set[Edge]:
        return set(self.fan)

    @property
    def all_edges(self) -> list[Edge]:
        return sorted(self.graph.edges | set(self.fan))

    def k_faces(self) -> list[int]:
        tri = set(self.triangles)
        out = set()
        for e in self.fan:
            out.update(k for k in self.embedding.dual_ends(e) if k not in tri)
        return sorted(out)


def hub_graph(g: PinnedGraph, hub: str = HUB) -> nx.Graph:
    if hub in g.vertices:
        raise ValidationError(f"hub id {hub!r} collides with a vertex")
    h = g.to_networkx()
    h.add_edges_from((hub, p) for p in sorted(g.pins))
    return h


def extend_with_ground(g: PinnedGraph, hub_rotation: Mapping[str, Sequence[str]] | None = None) -> ExtendedGraph:
    """Replace the hub of a planar G + hub embedding by the pin fan.

    With pins p1..pm clockwise around the hub, p1 sees p2..pm clockwise and
    pj (j >= 2) sees p(j+1), p1, p(j-1) clockwise inside the old hub wedge.
    """
    if hub_rotation is None:
        h = hub_graph(g)
        ok, emb = nx.check_planarity(h, counterexample=True)
        if not ok:
            raise NotPlanarError("G with its pins joined to one hub is not planar",
                                 [edge_key(u, v) for u, v in emb.edges])
        hub_rotation = {v: list(emb.neighbors_cw_order(v)) for v in emb.nodes}
    order = list(hub_rotation[HUB])
    start = order.index(min(order))
    pins = order[start:] + order[:start]
    m = len(pins)
    if m < 2:
        raise ValidationError("at least two pins are needed")
    ground = {pins[0]: pins[1:]}
    for j in range(1, m):
        seq = []
        if j + 1 < m:
            seq.append(pins[j + 1])
        seq.append(pins[0])
        if j - 1 >= 1:
            seq.append(pins[j - 1])
        ground[pins[j]] = seq
    rotation = {}
    for v, nbrs in hub_rotation.items():
        if v == HUB:
            continue
        rot = []
        for w in nbrs:
            rot.extend(ground[v] if w == HUB else [w])
        rotation[v] = rot
    emb = embedding_from_rotation(rotation)
    if emb.euler_characteristic() != 2:
        raise ValidationError("ground insertion produced a non-planar rotation system")
    fan = tuple(edge_key(u, v) for u, v in ground_fan(pins))
    fan_set = set(fan)
    tris = tuple(
        k for k, face in enumerate(emb.faces)
        if len(face) == 3 and all(edge_key(*h) in fan_set for h in face)
    )
    if len(tris) != max(m - 2, 0):
        raise ValidationError("fan triangles are not faces of the embedding")
    return ExtendedGraph(g, tuple(pins), fan, emb, tris)


# -- dual side ----------------------------------------------------------------

def dual_stress_basis(ext: ExtendedGraph, q: Mapping[str, np.ndarray], edges: Sequence[Edge],
                      faces: Sequence[str]) -> np.ndarray:
    """Cokernel of the dual rigidity matrix over ``edges`` (rows) and ``faces`` (columns)."""
    emb = ext.embedding
    dual_edges = []
    for e in edges:
        h, k = emb.dual_ends(e)
        dual_edges.append((face_name(h), face_name(k)))
    a = matrix_for(dual_edges, q, faces)
    return null_basis(a.T)


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.max(np.abs(v))


def _tree_positions(ext: ExtendedGraph, q: dict[str, np.ndarray], rng: np.random.Generator) -> None:
    k_pts = np.array([q[face_name(k)] for k in ext.k_faces()])
    centre = k_pts.mean(axis=0)
    spread = max(float(np.max(np.linalg.norm(k_pts - centre, axis=1))), 1.0)
    for t in ext.triangles:
        q[face_name(t)] = centre + rng.normal(scale=0.25 * spread, size=2)


def _mix(base: np.ndarray, extra: np.ndarray, g_rows: np.ndarray, t_rows: np.ndarray) -> tuple[np.ndarray, float]:
    """Base + eps * extra; eps starts at 1e-2 * |base|_inf and halves until no G bar is eaten."""
    floor = 0.5 * np.min(np.abs(base[g_rows]))
    eps = 1e-2 * np.max(np.abs(base))
    for _ in range(60):
        mixed = base + eps * extra
        ok_g = np.min(np.abs(mixed[g_rows])) >= floor
        ok_t = t_rows.size == 0 or np.min(np.abs(mixed[t_rows])) > LEAK * np.max(np.abs(mixed))
        if ok_g and ok_t:
            return mixed, eps
        eps /= 2
    raise ConstructionError("stress mixing lost its margin")


def _finish(ext: ExtendedGraph, q: dict[str, np.ndarray], base: dict[Edge, float],
            target: PinnedGraph, tol: Tolerance) -> tuple[Framework, dict]:
    """Steps shared by both routes, starting from a dual placement with the tree inserted."""
    edges = ext.all_edges
    faces = ext.embedding.face_names
    basis = dual_stress_basis(ext, q, edges, faces)
    if basis.shape[1] != 2:
        raise ConstructionError(f"dual with inserted tree has {basis.shape[1]} stresses, expected 2")
    base_vec = np.array([base.get(e, 0.0) for e in edges])
    base_vec = _normalize(base_vec)
    # the base stress must lie in the dual cokernel
    coef = np.linalg.lstsq(basis, base_vec, rcond=None)[0]
    if np.linalg.norm(basis @ coef - base_vec) > 1e-7:
        raise ConstructionError("circuit stress does not extend to the dual with the tree")
    extra = basis[:, 0] * coef[1] - basis[:, 1] * coef[0]
    extra = _normalize(extra)
    tree = ext.tree_edges
    g_rows = np.array([k for k, e in enumerate(edges) if e not in tree], dtype=int)
    t_rows = np.array([k for k, e in enumerate(edges) if e in tree], dtype=int)
    if t_rows.size and np.min(np.abs(extra[t_rows])) <= LEAK:
        raise ConstructionError("tree stress vanishes on a tree edge")
    lam, eps = _mix(base_vec, extra, g_rows, t_rows)
    lam_v = lam + base_vec
    root = ext.pins[0]
    omega = dict(zip(edges, lam))
    omega_v = dict(zip(edges, lam_v))
    p, misfit = reciprocal_of_dual(ext.embedding, q, omega, root)
    p_par, misfit_v = reciprocal_of_dual(ext.embedding, q, omega_v, root)
    scale = max(float(np.max([np.linalg.norm(x) for x in p.values()])), 1e-300)
    ground_shift = max(float(np.linalg.norm(p[v] - p_par[v])) for v in ext.pins)
    stages = {
        "dual_config": {n: tuple(x) for n, x in q.items()},
        "dual_stress": omega,
        "eps": eps,
        "closure": max(misfit, misfit_v) / scale,
        "ground_shift": ground_shift / scale,
        "extended_config": {v: tuple(x) for v, x in p.items()},
        "parallel_config": {v: tuple(x) for v, x in p_par.items()},
    }
    if stages["closure"] > 1e-7:
        raise ConstructionError("primal reciprocal did not close")
    conf = Configuration({v: tuple(p[v]) for v in target.vertices})
    par = Configuration({v: tuple(p_par[v]) for v in target.vertices})
    f = Framework(target, conf)
    stages["parallel_drawing"] = ParallelDrawing(par, f)
    stages["constructed_stress"] = {e: 1.0 / omega[e] for e in edges if e not in tree}
    return f, stages


def _certify(f: Framework, stages: dict, tol: Tolerance, construct_motion: bool = True) -> SingularCertificate:
    report = stress_motion_report(f, tol)
    if not report.holds:
        raise ConstructionError(
            f"certificate failed: stress dim {report.stress_dim}, motion dim {report.motion_dim}, "
            f"margins {report.stress_margin:.2e}/{report.motion_margin:.2e}"
        )
    stress = self_stresses(f, tol)[0]
    motion = first_order_motions(f, tol)[0]
    edges = f.graph.sorted_edges()
    inner = sorted(f.graph.inner)
    residuals = {
        "equilibrium": equilibrium_residual(f, stress),
        "motion": motion_residual(f, motion),
    }
    if construct_motion and "parallel_drawing" in stages:
        built = motion_from_parallel_drawing(f, stages["parallel_drawing"], tol=1e-6)
        a = motion_matrix([built], inner)[:, 0]
        b = motion_matrix([motion], inner)[:, 0]
        residuals["constructed_motion_angle"] = float(
            np.sqrt(max(0.0, 1 - (np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))) ** 2))
        )
        built_stress = stages.get("constructed_stress")
        if built_stress is not None and all(e in built_stress for e in edges):
            c = np.array([built_stress[e] for e in edges])
            d = stress_matrix([stress], edges)[:, 0]
            residuals["constructed_stress_angle"] = float(
                np.sqrt(max(0.0, 1 - (np.dot(c, d) / (np.linalg.norm(c) * np.linalg.norm(d))) ** 2))
            )
    margins = {"stress": report.stress_margin, "motion": report.motion_margin}
    return SingularCertificate(f, stress, motion, residuals, margins, 1, 1, stages)


def construct_singular_planar(g: PinnedGraph, embedding: Mapping[str, Sequence[str]] | None = None,
                              seed: int = 0, attempts: int = 20, tol: Tolerance = DEFAULT_TOL) -> SingularCertificate:
    """Singular realization of a planar Assur graph via a generic stressed dual circuit.

    ``embedding`` optionally fixes the clockwise rotation system of G with
    every pin joined to a hub vertex "p*" (the contracted ground).
    """
    if not is_assur(g):
        raise NotAssurError("construction needs an Assur graph")
    ext = extend_with_ground(g, embedding)
    rng = np.random.default_rng(seed)
    tri = {face_name(t) for t in ext.triangles}
    circuit_faces = [n for n in ext.embedding.face_names if n not in tri]
    circuit_edges = g.sorted_edges()
    last = None
    for _ in range(attempts):
        q = {n: rng.uniform(-10, 10, size=2) for n in circuit_faces}
        basis = dual_stress_basis(ext, q, circuit_edges, circuit_faces)
        if basis.shape[1] != 1 or np.min(np.abs(basis[:, 0])) <= 1e-3 * np.max(np.abs(basis[:, 0])):
            last = "dual circuit realization is not generic"
            continue
        _tree_positions(ext, q, rng)
        base = dict(zip(circuit_edges, basis[:, 0]))
        try:
            f, stages = _finish(ext, q, base, g, tol)
            stages["circuit_stress"] = base
            return _certify(f, stages, tol)
        except (ConstructionError, ValidationError) as exc:
            last = str(exc)
    raise ConstructionError(f"no certificate after {attempts} attempts: {last}")


def construct_singular_nonplanar(g: PinnedGraph, crossings: Sequence[tuple[Edge, Edge]], seed: int = 0,
                                 attempts: int = 20, tol: Tolerance = DEFAULT_TOL) -> SingularCertificate:
    """Singular realization through Bow's notation on declared crossing pairs."""
    if not crossings:
        return construct_singular_planar(g, seed=seed, attempts=attempts, tol=tol)
    if not is_assur(g):
        raise NotAssurError("construction needs an Assur graph")
    rng = np.random.default_rng(seed)
    last = None
    for _ in range(attempts):
        inner = sorted(g.inner)
        ground_pt = rng.uniform(-10, 10, size=2)
        pts = {v: tuple(rng.uniform(-10, 10, size=2)) for v in inner}
        pts.update({p: tuple(ground_pt) for p in g.pins})
        try:
            bowed = bow_insert_crossings(Framework(g, Configuration(pts)), crossings)
        except ValidationError as exc:
            last = str(exc)
            continue
        gb = bowed.framework.graph
        ok, hub_emb = nx.check_planarity(hub_graph(gb))
        if not ok:
            raise NotPlanarError("declared crossings do not planarize the graph with its ground hub")
        hub_rotation = {v: list(hub_emb.neighbors_cw_order(v)) for v in hub_emb.nodes}
        ext = extend_with_ground(gb, hub_rotation)
        w = embedding_from_rotation(hub_rotation)
        # stress of the contracted, Bowed circuit
        cols = sorted(gb.inner) + [HUB]
        column_of = {p: HUB for p in gb.pins}
        bp = {v: bowed.framework.config[v] for v in gb.vertices}
        bp[HUB] = ground_pt
        edges_b = gb.sorted_edges()
        a = matrix_for(edges_b, bp, cols, column_of)
        basis = null_basis(a.T)
        if basis.shape[1] != 1 or np.min(np.abs(basis[:, 0])) <= 1e-3 * np.max(np.abs(basis[:, 0])):
            last = "Bowed circuit realization is not generic"
            continue
        lam = dict(zip(edges_b, basis[:, 0]))
        # dual of the contracted circuit: contracting the hub bars deletes their duals
        relations = []
        for e in edges_b:
            h, k = w.dual_ends(e)
            vec = lam[e] * (bp[e[0]] - bp[e[1]])
            relations.append((face_name(h), face_name(k), vec))
        qw, misfit = _walk(w.face_names, relations, face_name(w.outer_face))
        if misfit > 1e-7 * max(max(np.linalg.norm(x) for x in qw.values()), 1e-300):
            last = "reciprocal of the Bowed circuit did not close"
            continue
        # faces of the extended graph off the fan match hub-embedding faces through any G half-edge
        q = {}
        for half, k in ext.embedding.face_of.items():
            if edge_key(*half) in gb.edges:
                q[face_name(k)] = qw[face_name(w.face_of[half])]
        _tree_positions(ext, q, rng)
        omega_star = {e: 1.0 / lam[e] for e in edges_b}
        try:
            fb, stages = _finish(ext, q, omega_star, gb, tol)
        except (ConstructionError, ValidationError) as exc:
            last = str(exc)
            continue
        # drop the crossing vertices: they sit on both lines by construction
        collinear = 0.0
        scale = fb.config.diameter()
        for x, (e1, e2) in bowed.crossings.items():
            for u, v in (e1, e2):
                d, r = fb.config[v] - fb.config[u], fb.config[x] - fb.config[u]
                collinear = max(collinear, abs(d[0] * r[1] - d[1] * r[0]) / (np.linalg.norm(d) * scale))
        stages["crossing_collinearity"] = collinear
        conf = fb.config.restricted(g.vertices)
        par = stages["parallel_drawing"].points.restricted(g.vertices)
        try:
            f = Framework(g, conf)
            stages["parallel_drawing"] = ParallelDrawing(par, f)
            stages.pop("constructed_stress", None)
            stages["bowed"] = fb
            return _certify(f, stages, tol)
        except (ConstructionError, ValidationError) as exc:
            last = str(exc)
    raise ConstructionError(f"no certificate after {attempts} attempts: {last}")


# -- numeric oracle -----------------------------------------------------------

@dataclass(frozen=True)
class NotFound:
    tried: int
    reason: str = ""


def _bisect(f_of_t, lo: float, hi: float, flo: float, iters: int = 200) -> float:
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f_of_t(mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def numeric_singular_search(g: PinnedGraph, seed: int = 0, iters: int = 50, samples: int = 400,
                            tol: Tolerance = DEFAULT_TOL) -> SingularCertificate | NotFound:
    """Locate a singular configuration by scanning the pure condition along random lines.

    Each start draws a generic configuration and a direction, brackets a
    sign change of the determinant and bisects it to machine precision. The
    first point meeting the certificate margins is returned.
    """
    if len(g.edges) != 2 * len(g.inner):
        raise ValidationError("numeric search needs |E| = 2|I|")
    rng = np.random.default_rng(seed)
    ids = sorted(g.vertices)
    inner_idx = [k for k, v in enumerate(ids) if v in g.inner]
    for attempt in range(iters):
        base = random_generic_configuration(g, int(rng.integers(2**31))).array(ids)
        direction = np.zeros_like(base)
        direction[inner_idx] = rng.normal(size=(len(inner_idx), 2))
        direction *= np.abs(base).max() / np.abs(direction).max()

        def det_at(t):
            try:
                return pure_condition_value(Framework(g, Configuration.from_array(ids, base + t * direction)))
            except ValidationError:
                return np.nan

        ts = np.linspace(-2.0, 2.0, samples)
        vals = np.array([det_at(t) for t in ts])
        for k in np.argsort(np.abs(ts[:-1])):
            a, b = vals[k], vals[k + 1]
            if not (np.isfinite(a) and np.isfinite(b)) or np.sign(a) == np.sign(b):
                continue
            t = _bisect(det_at, ts[k], ts[k + 1], a)
            try:
                f = Framework(g, Configuration.from_array(ids, base + t * direction))
                cert = _certify(f, {"search_t": t, "attempt": attempt}, tol, construct_motion=False)
            except (ConstructionError, ValidationError):
                continue
            return cert
    return NotFound(iters, "no sign change met the certificate margins")


# -- conjecture probe -------------------------------------------------------

@dataclass(frozen=True)
class ProbeReport:
    motion_dim: int
    uncovered_edges: tuple[Edge, ...]

    @property
    def consistent(self) -> bool:
        return self.motion_dim == 1 and not self.uncovered_edges


@dataclass
class ProbeStats:
    runs: int = 0
    consistent: int = 0
    counterexamples: list = field(default_factory=list)

    def add(self, f: Framework, report: ProbeReport) -> None:
        self.runs += 1
        if report.consistent:
            self.consistent += 1
        else:
            self.counterexamples.append((f, report))


def conjecture_probe(f: Framework, tol: Tolerance = DEFAULT_TOL, stats: ProbeStats | None = None) -> ProbeReport:
    """Check whether the unique motion moves at least one end of every bar.

    Gathers evidence only; a negative result is recorded, not raised.
    """
    if not is_assur(f.graph):
        raise NotAssurError("probe needs an Assur graph")
    stresses = self_stresses(f, tol)
    if len(stresses) != 1:
        raise ValidationError(f"probe needs a 1-dim stress space, got {len(stresses)}")
    lam = np.abs(stress_matrix(stresses, f.graph.sorted_edges())[:, 0])
    if lam.min() <= LEAK * lam.max():
        raise ValidationError("stress vanishes on some bar")
    motions = first_order_motions(f, tol)
    inner = sorted(f.graph.inner)
    if motions:
        block = np.linalg.norm(motion_matrix(motions, inner).reshape(len(inner), 2, -1), axis=(1, 2))
        moving = {v for v, s in zip(inner, block) if s > LEAK * block.max()}
    else:
        moving = set()
    uncovered = tuple(e for e in f.graph.sorted_edges() if not (set(e) & moving))
    report = ProbeReport(len(motions), uncovered)
    if stats is not None:
        stats.add(f, report)
    return report


# -- geometric diagnostics ----------------------------------------------------

def collinearity_residual(points: Sequence[np.ndarray]) -> float:
    """Smallest singular value of the centred point cloud over its diameter."""
    pts = np.asarray(points, float)
    c = pts - pts.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False)
    return float(s[-1] / max(s[0], 1e-300))


def concurrency_residual(lines: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    """Max distance from the least-squares common point to each line, over the diameter.

    Lines that are all parallel meet at infinity and report zero.
    """
    normals, offsets, pts = [], [], []
    for a, b in lines:
        a, b = np.asarray(a, float), np.asarray(b, float)
        d = (b - a) / np.linalg.norm(b - a)
        n = np.array([-d[1], d[0]])
        normals.append(n)
        offsets.append(np.dot(n, a))
        pts += [a, b]
    n, o = np.array(normals), np.array(offsets)
    scale = max(np.max(np.linalg.norm(np.array(pts)[:, None] - np.array(pts)[None], axis=-1)), 1e-300)
    s = np.linalg.svd(n, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        return 0.0
    x = np.linalg.lstsq(n, o, rcond=None)[0]
    return float(np.max(np.abs(n @ x - o)) / scale)


def leg_lines(f: Framework) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(f.config[u], f.config[v]) for u, v in f.graph.sorted_edges() if (u in f.graph.pins) != (v in f.graph.pins)]
