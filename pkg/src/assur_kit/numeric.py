"""Rigidity matrix, first-order motions, self-stresses and the pure condition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .counts import pinned_rank
from .model import Configuration, Edge, Framework, PinnedGraph, ValidationError, edge_key


@dataclass(frozen=True)
class Tolerance:
    rank_rel: float = 1e-9
    residual_abs: float = 1e-8

    def __post_init__(self):
        if self.rank_rel <= 0 or self.residual_abs <= 0:
            raise ValueError("tolerances must be positive")

    def cutoff(self, singular_values: np.ndarray, shape: tuple[int, int]) -> float:
        smax = float(singular_values[0]) if singular_values.size else 0.0
        return self.rank_rel * smax * max(shape)


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True)
class RigidityMatrix:
    matrix: np.ndarray
    edges: tuple[Edge, ...]
    columns: tuple[str, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def row(self, e: Edge) -> int:
        return self.edges.index(edge_key(*e))

    def column(self, v: str) -> int:
        return 2 * self.columns.index(v)


@dataclass(frozen=True)
class SelfStress:
    values: Mapping[Edge, float]

    def vector(self, edges: Sequence[Edge]) -> np.ndarray:
        return np.array([self.values[edge_key(*e)] for e in edges], dtype=float)

    def __getitem__(self, e: Edge) -> float:
        return self.values[edge_key(*e)]


@dataclass(frozen=True)
class Motion:
    velocity: Mapping[str, tuple[float, float]]

    def __getitem__(self, v: str) -> np.ndarray:
        return np.asarray(self.velocity.get(v, (0.0, 0.0)), dtype=float)

    def vector(self, ids: Sequence[str]) -> np.ndarray:
        return np.concatenate([self[v] for v in ids]) if ids else np.zeros(0)

    def speeds(self) -> dict[str, float]:
        return {v: float(np.hypot(*xy)) for v, xy in self.velocity.items()}


def matrix_for(edges: Sequence[Edge], points: Mapping[str, np.ndarray], columns: Sequence[str],
               column_of: Mapping[str, str] | None = None) -> np.ndarray:
    """Rows (p_i - p_j) in the columns of i and (p_j - p_i) in those of j.

    ``column_of`` maps a vertex to the column owner (used to contract pins
    onto one ground vertex); vertices with no column are treated as fixed.
    """
    index = {v: k for k, v in enumerate(columns)}
    column_of = column_of or {}
    m = np.zeros((len(edges), 2 * len(columns)))
    for r, (i, j) in enumerate(edges):
        d = np.asarray(points[i], float) - np.asarray(points[j], float)
        ci, cj = column_of.get(i, i), column_of.get(j, j)
        if ci in index:
            m[r, 2 * index[ci]:2 * index[ci] + 2] += d
        if cj in index:
            m[r, 2 * index[cj]:2 * index[cj] + 2] -= d
    return m


def build_rigidity_matrix(f: Framework) -> RigidityMatrix:
    g = f.graph
    if not g.inner:
        raise ValidationError("framework has no inner vertex; the pinned matrix has no columns")
    edges = tuple(g.sorted_edges())
    cols = tuple(sorted(g.inner))
    pts = {v: f.config[v] for v in g.vertices}
    return RigidityMatrix(matrix_for(edges, pts, cols), edges, cols)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def null_basis(a: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal kernel basis of ``a`` as columns; sign-normalized."""
    rows, cols = a.shape
    if cols == 0:
        return np.zeros((0, 0))
    if rows == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > tol.cutoff(s, a.shape))) if s.size else 0
    basis = vt[rank:].T
    return np.column_stack([_fix_sign(basis[:, k]) for k in range(basis.shape[1])]) if basis.size else np.zeros((cols, 0))


def matrix_rank(a: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> int:
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol.cutoff(s, a.shape)))


def numeric_rank(m: RigidityMatrix | np.ndarray, tol: Tolerance = DEFAULT_TOL) -> int:
    a = m.matrix if isinstance(m, RigidityMatrix) else np.asarray(m, float)
    return matrix_rank(a, tol)


def trivial_motions(f: Framework) -> np.ndarray:
    """Translations and rotation about the origin, columns over the inner vertices."""
    cols = sorted(f.graph.inner)
    t = np.zeros((2 * len(cols), 3))
    for k, v in enumerate(cols):
        x, y = f.config[v]
        t[2 * k:2 * k + 2, 0] = (1, 0)
        t[2 * k:2 * k + 2, 1] = (0, 1)
        t[2 * k:2 * k + 2, 2] = (-y, x)
    return t


def first_order_motions(f: Framework, tol: Tolerance = DEFAULT_TOL, nontrivial: bool = False) -> list[Motion]:
    """Kernel of the pinned rigidity matrix.

    With ``nontrivial`` set on an unpinned framework, the trivial motions are
    projected out and the returned basis is orthogonal to them.
    """
    rm = build_rigidity_matrix(f)
    a = rm.matrix
    if nontrivial and not f.graph.pins:
        q, _ = np.linalg.qr(trivial_motions(f))
        a = np.vstack([a, q.T * max(1.0, np.abs(a).max(initial=0.0))])
    basis = null_basis(a, tol)
    return [_motion(rm.columns, basis[:, k]) for k in range(basis.shape[1])]


def _motion(columns: Sequence[str], vec: np.ndarray) -> Motion:
    return Motion({v: (float(vec[2 * k]), float(vec[2 * k + 1])) for k, v in enumerate(columns)})


def self_stresses(f: Framework, tol: Tolerance = DEFAULT_TOL) -> list[SelfStress]:
    rm = build_rigidity_matrix(f)
    basis = null_basis(rm.matrix.T, tol)
    return [SelfStress({e: float(basis[r, k]) for r, e in enumerate(rm.edges)}) for k in range(basis.shape[1])]


def stress_matrix(stresses: Sequence[SelfStress], edges: Sequence[Edge]) -> np.ndarray:
    return np.column_stack([s.vector(edges) for s in stresses]) if stresses else np.zeros((len(edges), 0))


def motion_matrix(motions: Sequence[Motion], ids: Sequence[str]) -> np.ndarray:
    return np.column_stack([m.vector(ids) for m in motions]) if motions else np.zeros((2 * len(ids), 0))


def equilibrium_residual(f: Framework, s: SelfStress, at: Sequence[str] | None = None) -> float:
    """Largest norm of the unbalanced force over ``at`` (default: inner vertices)."""
    at = sorted(f.graph.inner) if at is None else at
    force = {v: np.zeros(2) for v in at}
    for (i, j), lam in s.values.items():
        d = f.config[i] - f.config[j]
        if i in force:
            force[i] += lam * d
        if j in force:
            force[j] -= lam * d
    return max((float(np.linalg.norm(x)) for x in force.values()), default=0.0)


def motion_residual(f: Framework, m: Motion) -> float:
    pins = f.graph.pins
    worst = 0.0
    for i, j in f.graph.edges:
        vi = np.zeros(2) if i in pins else m[i]
        vj = np.zeros(2) if j in pins else m[j]
        worst = max(worst, abs(float(np.dot(f.config[i] - f.config[j], vi - vj))))
    return worst


def pure_condition_value(f: Framework) -> float:
    """Determinant of the square pinned rigidity matrix, via LU (slogdet)."""
    rm = build_rigidity_matrix(f)
    rows, cols = rm.shape
    if rows != cols:
        raise ValidationError(f"pure condition needs a square matrix, got {rows}x{cols}")
    sign, logdet = np.linalg.slogdet(rm.matrix)
    return float(sign * np.exp(logdet)) if sign != 0 else 0.0


def strain(f: Framework, motion: Motion, pair: tuple[str, str]) -> float:
    i, j = pair
    for v in pair:
        if v not in f.config:
            raise ValidationError(f"unknown vertex {v!r}")
    vi = np.zeros(2) if i in f.graph.pins else motion[i]
    vj = np.zeros(2) if j in f.graph.pins else motion[j]
    return float(np.dot(f.config[i] - f.config[j], vi - vj))


GRID = 2.0**-20


def _sample(rng: np.random.Generator, ids: Sequence[str], box: float = 10.0) -> Configuration:
    k = int(box / GRID)
    pts = rng.integers(-k, k + 1, size=(len(ids), 2)) * GRID
    return Configuration.from_array(ids, pts)


def random_generic_configuration(g: PinnedGraph, seed: int = 0, retries: int = 25,
                                 tol: Tolerance = DEFAULT_TOL) -> Configuration:
    """Seeded grid-rational configuration in [-10, 10]^2 that behaves generically.

    Resamples until the numeric rank equals the pebble-game rank and, for a
    square pinned matrix, the pure condition is clear of zero.
    """
    rng = np.random.default_rng(seed)
    ids = sorted(g.vertices)
    target = pinned_rank(g) if g.inner else 0
    for _ in range(retries):
        c = _sample(rng, ids)
        try:
            f = Framework(g, c)
        except ValidationError:
            continue
        if not g.inner:
            return c
        rm = build_rigidity_matrix(f)
        if numeric_rank(rm, tol) != target:
            continue
        if rm.shape[0] == rm.shape[1]:
            s = np.linalg.svd(rm.matrix, compute_uv=False)
            if s[-1] <= tol.cutoff(s, rm.shape) * 1e3:
                continue
        return c
    raise RuntimeError(f"no generic configuration found in {retries} attempts; graph is combinatorially dependent")


def analyze(f: Framework, tol: Tolerance = DEFAULT_TOL) -> dict:
    rm = build_rigidity_matrix(f)
    motions = first_order_motions(f, tol)
    stresses = self_stresses(f, tol)
    rows, cols = rm.shape
    return {
        "rank": numeric_rank(rm, tol),
        "dof": len(motions),
        "stress_dim": len(stresses),
        "motion_basis": [{v: list(xy) for v, xy in m.velocity.items()} for m in motions],
        "stress_basis": [{f"{u}-{v}": s.values[(u, v)] for u, v in rm.edges} for s in stresses],
        "pure_condition": pure_condition_value(f) if rows == cols else None,
    }


def bisect_pure_condition(f0: Framework, f1: Framework, iters: int = 200) -> Framework:
    """Bisect the straight path between two frameworks whose determinants differ in sign.

    Stops at float resolution of the path parameter, keeps the bracket end with
    the smaller absolute determinant and polishes it by secant steps on the one
    inner coordinate whose float spacing moves the determinant least.
    """
    if f0.graph != f1.graph:
        raise ValidationError("both frameworks must share one graph")
    g = f0.graph
    ids = sorted(g.vertices)
    x0, x1 = f0.config.array(ids), f1.config.array(ids)

    def at(t):
        return Framework(g, Configuration.from_array(ids, (1 - t) * x0 + t * x1))

    lo, hi = 0.0, 1.0
    dlo, dhi = pure_condition_value(f0), pure_condition_value(f1)
    if dlo == 0.0:
        return f0
    if dhi == 0.0:
        return f1
    if np.sign(dlo) == np.sign(dhi):
        raise ValidationError("pure condition has the same sign at both ends")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        dm = pure_condition_value(at(mid))
        if dm == 0.0:
            return at(mid)
        if np.sign(dm) == np.sign(dlo):
            lo, dlo = mid, dm
        else:
            hi, dhi = mid, dm
    best = at(lo if abs(dlo) <= abs(dhi) else hi)
    return _polish_coordinate(best)


def _polish_coordinate(f: Framework, steps: int = 8) -> Framework:
    g = f.graph
    ids = sorted(g.vertices)
    x = f.config.array(ids)
    det = pure_condition_value(f)
    if det == 0.0:
        return f
    h = 1e-7 * max(f.config.diameter(), 1.0)

    def value(y):
        return pure_condition_value(Framework(g, Configuration.from_array(ids, y)))

    slots = [(k, c) for k, v in enumerate(ids) if v in g.inner for c in (0, 1)]
    partials = {}
    for k, c in slots:
        y = x.copy()
        y[k, c] += h
        partials[(k, c)] = (value(y) - det) / h
    k, c = min(slots, key=lambda s: np.spacing(abs(x[s])) * abs(partials[s]) if partials[s] else np.inf)
    slope = partials[(k, c)]
    best_x, best_det = x, det
    y, dy = x.copy(), det
    for _ in range(steps):
        if slope == 0.0 or not np.isfinite(slope):
            break
        z = y.copy()
        z[k, c] -= dy / slope
        try:
            dz = value(z)
        except ValidationError:
            break
        if z[k, c] != y[k, c]:
            slope = (dz - dy) / (z[k, c] - y[k, c])
        y, dy = z, dz
        if abs(dy) < abs(best_det):
            best_x, best_det = y.copy(), dy
        if dy == 0.0:
            break
    return Framework(g, Configuration.from_array(ids, best_x))
