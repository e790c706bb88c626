"""Drivers on 1-DOF linkages: replacement and insertion, activity, path following, dead ends."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .assur import is_assur
from .counts import generic_dof, pinned_framework_conditions
from .model import Configuration, Edge, Framework, PinnedGraph, ValidationError, edge_key
from .numeric import DEFAULT_TOL, Tolerance, build_rigidity_matrix, self_stresses

PISTON, INNER_ANGLE, PIN_ANGLE = "piston", "inner_angle", "pin_angle"
_ARITY = {PISTON: 2, INNER_ANGLE: 3, PIN_ANGLE: 3}


@dataclass(frozen=True)
class Driver:
    """Piston (a, b), inner angle (a, b, c) at b, or pinned angle (a, p_i, p_j) at p_i."""

    kind: str
    vertices: tuple[str, ...]
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ValidationError(f"unknown driver kind {self.kind!r}")
        vs = tuple(str(v) for v in self.vertices)
        if len(vs) != _ARITY[self.kind]:
            raise ValidationError(f"{self.kind} driver takes {_ARITY[self.kind]} vertices")
        if len(set(vs)) != len(vs):
            raise ValidationError("driver vertices must be distinct")
        object.__setattr__(self, "vertices", vs)
        object.__setattr__(self, "rate", float(self.rate))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "vertices": list(self.vertices), "rate": self.rate}

    def virtual_bar(self) -> Edge:
        """The pair whose distance the driver controls."""
        v = self.vertices
        if self.kind == PISTON:
            return edge_key(v[0], v[1])
        if self.kind == INNER_ANGLE:
            return edge_key(v[0], v[2])
        return edge_key(v[0], v[2])


def Piston(a: str, b: str, rate: float = 1.0) -> Driver:
    return Driver(PISTON, (a, b), rate)


def InnerAngle(a: str, b: str, c: str, rate: float = 1.0) -> Driver:
    return Driver(INNER_ANGLE, (a, b, c), rate)


def PinAngle(a: str, p_i: str, p_j: str, rate: float = 1.0) -> Driver:
    return Driver(PIN_ANGLE, (a, p_i, p_j), rate)


def _check_driver(g: PinnedGraph, d: Driver) -> None:
    missing = [v for v in d.vertices if v not in g.vertices]
    if missing:
        raise ValidationError(f"driver references unknown vertices {missing}")
    v = d.vertices
    if d.kind == PISTON:
        if v[0] in g.pins and v[1] in g.pins:
            raise ValidationError("a piston between two pins drives nothing")
    elif d.kind == INNER_ANGLE:
        a, b, c = v
        if b not in g.inner:
            raise ValidationError("inner angle driver needs an inner apex")
        if not (g.has_edge(a, b) and g.has_edge(b, c)):
            raise ValidationError("inner angle driver needs bars ab and bc")
    else:
        a, p_i, p_j = v
        if a not in g.inner or p_i not in g.pins or p_j not in g.pins:
            raise ValidationError("pinned angle driver needs an inner vertex and two pins")
        if not g.has_edge(a, p_i):
            raise ValidationError("pinned angle driver needs the bar a-p_i")


@dataclass(frozen=True)
class Linkage:
    graph: PinnedGraph
    driver: Driver

    def __post_init__(self):
        _check_driver(self.graph, self.driver)
        dof = generic_dof(self.graph)
        if dof != 1:
            raise ValidationError(f"a linkage has one degree of freedom, got {dof}")


def _apply(g: PinnedGraph, d: Driver) -> PinnedGraph:
    v = d.vertices
    if d.kind == PISTON:
        if g.has_edge(*v):
            raise ValidationError(f"piston {v} sits on an existing bar")
        return g.with_edges(add=[v])
    if d.kind == INNER_ANGLE:
        a, b, c = v
        if g.has_edge(a, c):
            raise ValidationError(f"bar {edge_key(a, c)} already present")
        if g.degree(b) == 2:
            edges = {e for e in g.edges if b not in e} | {edge_key(a, c)}
            return PinnedGraph(g.inner - {b}, g.pins, edges)
        return g.with_edges(add=[(a, c)])
    a, p_i, _ = v
    edges = g.edges - {edge_key(a, p_i)}
    if any(a in e and (set(e) - {a}) <= g.pins for e in edges):
        raise ValidationError(f"pinning {a!r} would join it to another pin")
    return PinnedGraph(g.inner - {a}, g.pins | {a}, edges)


def replace_driver(l: Linkage) -> PinnedGraph:
    """Swap the driver for the bar (or pin) that freezes it."""
    return _apply(l.graph, l.driver)


# -- insertion ----------------------------------------------------------------

@dataclass(frozen=True)
class InsertionSpec:
    """``piston`` (a, b); ``angle`` (a, b, c) on a triangle; ``two_valent`` (a, c) with
    ``new_vertex`` b; ``pin_demotion`` (p_k, p_i, p_j)."""

    kind: str
    vertices: tuple[str, ...]
    new_vertex: str | None = None


def _triangles(g: PinnedGraph) -> list[tuple[str, str, str]]:
    out = []
    for x, y, z in itertools.combinations(sorted(g.inner), 3):
        if g.has_edge(x, y) and g.has_edge(y, z) and g.has_edge(x, z):
            out.append((x, y, z))
    return out


def _fresh(g: PinnedGraph, a: str, c: str) -> str:
    base = f"{a}_{c}"
    name, k = base, 0
    while name in g.vertices:
        k += 1
        name = f"{base}{k}"
    return name


def insert_driver(g: PinnedGraph, spec: InsertionSpec, config: Configuration | None = None,
                  rate: float = 1.0) -> Linkage:
    """Remove a bar or demote a pin, leaving a 1-DOF linkage with a driver.

    Non-Assur but isostatic input is accepted (callers may warn); the pin
    demotion rejects a demoted pin collinear with the other two when
    ``config`` is given.
    """
    if not pinned_framework_conditions(g).satisfied:
        raise ValidationError("driver insertion needs a pinned isostatic graph")
    v = spec.vertices
    if spec.kind == "piston":
        if not g.has_edge(*v):
            raise ValidationError(f"no bar {v} to turn into a piston")
        return Linkage(g.with_edges(remove=[v]), Piston(*v, rate=rate))
    if spec.kind == "angle":
        a, b, c = v
        if not (g.has_edge(a, b) and g.has_edge(b, c) and g.has_edge(a, c)):
            raise ValidationError(f"{v} is not a triangle")
        return Linkage(g.with_edges(remove=[(a, c)]), InnerAngle(a, b, c, rate=rate))
    if spec.kind == "two_valent":
        a, c = v
        if not g.has_edge(a, c):
            raise ValidationError(f"no bar {v} to split")
        b = spec.new_vertex or _fresh(g, a, c)
        if b in g.vertices:
            raise ValidationError(f"vertex {b!r} already exists")
        edges = (g.edges - {edge_key(a, c)}) | {edge_key(a, b), edge_key(b, c)}
        return Linkage(PinnedGraph(g.inner | {b}, g.pins, edges), InnerAngle(a, b, c, rate=rate))
    if spec.kind == "pin_demotion":
        p_k, p_i, p_j = v
        if len(g.pins) < 3:
            raise ValidationError("pin demotion needs at least three pins")
        if not {p_k, p_i, p_j} <= g.pins:
            raise ValidationError("pin demotion names three pins")
        if config is not None:
            for x, y in itertools.combinations(sorted(g.pins - {p_k}), 2):
                u, w = config[x] - config[p_k], config[y] - config[p_k]
                if abs(u[0] * w[1] - u[1] * w[0]) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(w):
                    raise ValidationError(f"demoted pin {p_k!r} is collinear with {x!r} and {y!r}")
        h = PinnedGraph(g.inner | {p_k}, g.pins - {p_k}, g.edges | {edge_key(p_k, p_i)})
        return Linkage(h, PinAngle(p_k, p_i, p_j, rate=rate))
    raise ValidationError(f"unknown insertion kind {spec.kind!r}")


def enumerate_insertions(g: PinnedGraph) -> list[InsertionSpec]:
    """Every legal insertion: pistons and 2-valent splits per bar, three angles per
    all-inner triangle, and one demotion per pin when there are at least three."""
    if not is_assur(g):
        raise ValidationError("insertion enumeration needs an Assur graph")
    edges = g.sorted_edges()
    specs = [InsertionSpec("piston", e) for e in edges]
    for tri in _triangles(g):
        for b in tri:
            a, c = [x for x in tri if x != b]
            specs.append(InsertionSpec("angle", (a, b, c)))
    specs += [InsertionSpec("two_valent", e, _fresh(g, *e)) for e in edges]
    pins = sorted(g.pins)
    if len(pins) >= 3:
        for p in pins:
            p_i, p_j = [x for x in pins if x != p][:2]
            specs.append(InsertionSpec("pin_demotion", (p, p_i, p_j)))
    return specs


# -- activity -----------------------------------------------------------------

def _perp(x: np.ndarray) -> np.ndarray:
    return np.array([-x[1], x[0]])


def driver_row(g: PinnedGraph, d: Driver, c: Configuration) -> np.ndarray:
    """Rate of the driven quantity as a linear form on inner velocities."""
    cols = sorted(g.inner)
    row = np.zeros(2 * len(cols))
    index = {v: k for k, v in enumerate(cols)}

    def put(v, vec):
        if v in index:
            row[2 * index[v]:2 * index[v] + 2] += vec

    v = d.vertices
    if d.kind == PISTON:
        a, b = v
        put(a, c[a] - c[b])
        put(b, c[b] - c[a])
    elif d.kind == INNER_ANGLE:
        a, b, cc = v
        u, w = c[a] - c[b], c[cc] - c[b]
        ra, rc = -_perp(u) / np.dot(u, u), _perp(w) / np.dot(w, w)
        put(a, ra)
        put(cc, rc)
        put(b, -ra - rc)
    else:
        a, p_i, _ = v
        u = c[a] - c[p_i]
        put(a, -_perp(u) / np.dot(u, u))
    return row


def is_active(l: Linkage, c: Configuration, tol: float = 1e-8) -> bool:
    """Whether a unit driver rate has a velocity response respecting every bar."""
    f = Framework(l.graph, c)
    r = build_rigidity_matrix(f).matrix
    a = np.vstack([r, driver_row(l.graph, l.driver, c)])
    norms = np.linalg.norm(a, axis=1)
    norms[norms == 0] = 1.0
    a = a / norms[:, None]
    rhs = np.zeros(a.shape[0])
    rhs[-1] = 1.0
    x = np.linalg.lstsq(a, rhs, rcond=None)[0]
    return float(np.linalg.norm(a @ x - rhs)) <= tol


# -- path following -------------------------------------------------------------

SINGULAR_CROSSING, DEAD_END, STEP_FAILURE = "SingularCrossing", "DeadEnd", "StepFailure"


@dataclass(frozen=True)
class Sample:
    config: Configuration
    parameter: float
    pure_condition: float
    stress_dim: int
    sigma_min: float


@dataclass(frozen=True)
class Event:
    index: int
    kind: str
    detail: str = ""


@dataclass
class Trajectory:
    samples: list[Sample] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)

    def configs(self) -> list[Configuration]:
        return [s.config for s in self.samples]

    def to_dict(self) -> dict:
        return {
            "samples": [
                {
                    "config": {v: list(xy) for v, xy in s.config.points.items()},
                    "parameter": s.parameter,
                    "pure_condition": s.pure_condition,
                    "stress_dim": s.stress_dim,
                    "sigma_min": s.sigma_min,
                }
                for s in self.samples
            ],
            "events": [{"index": e.index, "kind": e.kind, "detail": e.detail} for e in self.events],
        }


class _System:
    """Bar-length equations of the linkage plus the driver's virtual bar."""

    def __init__(self, l: Linkage, c0: Configuration):
        self.l = l
        g = l.graph
        self.inner = sorted(g.inner)
        self.index = {v: k for k, v in enumerate(self.inner)}
        self.fixed = {v: c0[v] for v in g.pins}
        self.bars = g.sorted_edges()
        self.lengths2 = np.array([np.sum((c0[i] - c0[j]) ** 2) for i, j in self.bars])
        self.pair = l.driver.virtual_bar()
        d = l.driver
        if d.kind == PISTON:
            self.parameter0 = float(np.linalg.norm(c0[d.vertices[0]] - c0[d.vertices[1]]))
        else:
            a, b, c = d.vertices
            u, w = c0[a] - c0[b], c0[c] - c0[b]
            self.arm2 = float(np.linalg.norm(u) * np.linalg.norm(w))
            self.arm_sq = float(np.dot(u, u) + np.dot(w, w))
            self.parameter0 = float(np.arccos(np.clip(np.dot(u, w) / self.arm2, -1, 1)))
        self.scale = max(c0.diameter(), 1e-300)

    def target2(self, parameter: float) -> float:
        if self.l.driver.kind == PISTON:
            return parameter**2
        # law of cosines turns the commanded angle into a virtual bar length
        return self.arm_sq - 2 * self.arm2 * np.cos(parameter)

    def point(self, x: np.ndarray, v: str) -> np.ndarray:
        k = self.index.get(v)
        return self.fixed[v] if k is None else x[2 * k:2 * k + 2]

    def residual(self, x: np.ndarray, parameter: float) -> np.ndarray:
        out = [np.sum((self.point(x, i) - self.point(x, j)) ** 2) - l2 for (i, j), l2 in zip(self.bars, self.lengths2)]
        i, j = self.pair
        out.append(np.sum((self.point(x, i) - self.point(x, j)) ** 2) - self.target2(parameter))
        return np.array(out)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        jac = np.zeros((len(self.bars) + 1, x.size))
        for r, (i, j) in enumerate(self.bars + [self.pair]):
            d = 2 * (self.point(x, i) - self.point(x, j))
            if i in self.index:
                jac[r, 2 * self.index[i]:2 * self.index[i] + 2] += d
            if j in self.index:
                jac[r, 2 * self.index[j]:2 * self.index[j] + 2] -= d
        return jac

    def x_of(self, c: Configuration) -> np.ndarray:
        return np.concatenate([c[v] for v in self.inner])

    def config_of(self, x: np.ndarray) -> Configuration:
        pts = {v: tuple(self.fixed[v]) for v in self.fixed}
        pts.update({v: (float(x[2 * k]), float(x[2 * k + 1])) for k, v in enumerate(self.inner)})
        return Configuration(pts)

    def converged(self, x: np.ndarray, parameter: float, rel: float = 1e-14) -> bool:
        res = self.residual(x, parameter)
        return float(np.max(np.abs(res))) <= rel * self.scale**2

    def correct(self, x: np.ndarray, parameter: float, iters: int = 30) -> np.ndarray | None:
        """Newton on the bar equations (minimum-norm steps), then a damped fallback."""
        y = x.copy()
        for _ in range(iters):
            if self.converged(y, parameter):
                return y
            step = np.linalg.lstsq(self.jacobian(y), -self.residual(y, parameter), rcond=None)[0]
            y = y + step
            if not np.all(np.isfinite(y)) or np.linalg.norm(y - x) > 0.5 * self.scale:
                break
        sol = least_squares(self.residual, x, jac=lambda z, *_: self.jacobian(z), args=(parameter,),
                            method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        if self.converged(sol.x, parameter, 1e-12) and np.linalg.norm(sol.x - x) <= 0.5 * self.scale:
            return sol.x
        return None

    def advance(self, x: np.ndarray, p_from: float, p_to: float, min_step: float) -> tuple[np.ndarray, float]:
        """Walk the parameter from p_from to p_to, halving on corrector failure."""
        h = p_to - p_from
        p = p_from
        while abs(p_to - p) > 0:
            h = np.sign(p_to - p) * min(abs(h), abs(p_to - p))
            jac = self.jacobian(x)
            rhs = np.zeros(jac.shape[0])
            rhs[-1] = self.target2(p + h) - self.target2(p)
            guess = x + np.linalg.lstsq(jac, rhs, rcond=None)[0]
            y = self.correct(guess, p + h)
            if y is None:
                y = self.correct(x, p + h)
            if y is None:
                if abs(h) / 2 < min_step:
                    return x, p
                h /= 2
                continue
            x, p = y, p + h
        return x, p


def _replaced_state(l: Linkage, g_bar: PinnedGraph, c: Configuration, tol: Tolerance) -> tuple[float, int, float]:
    f = Framework(g_bar, c.restricted(g_bar.vertices))
    a = build_rigidity_matrix(f).matrix
    s = np.linalg.svd(a, compute_uv=False)
    det = float(np.linalg.det(a)) if a.shape[0] == a.shape[1] else float("nan")
    return det, len(self_stresses(f, tol)), float(s[-1] / s[0])


def _min_step(l: Linkage, sys: _System) -> float:
    return 1e-6 * (sys.scale if l.driver.kind == PISTON else 1.0)


def drive(l: Linkage, c0: Configuration, step: float, n: int, tol: Tolerance = DEFAULT_TOL) -> Trajectory:
    """Follow the driven motion for ``n`` samples of ``step`` times the driver rate.

    Piston steps are lengths; angle steps are radians (angles live in [0, pi]).
    """
    sys = _System(l, c0)
    g_bar = replace_driver(l)
    traj = Trajectory()
    det, sdim, smin = _replaced_state(l, g_bar, c0, tol)
    traj.samples.append(Sample(c0, sys.parameter0, det, sdim, smin))
    # a stall is a dead end when the replaced graph has degenerated relative to the start
    smin0 = smin
    x, p = sys.x_of(c0), sys.parameter0
    for k in range(1, n + 1):
        target = sys.parameter0 + k * step * l.driver.rate
        x_new, p_new = sys.advance(x, p, target, _min_step(l, sys))
        if p_new != target:
            last = traj.samples[-1]
            kind = DEAD_END if last.stress_dim > 0 or last.sigma_min < 1e-2 * smin0 else STEP_FAILURE
            if p_new != p:
                c = sys.config_of(x_new)
                det, sdim, smin = _replaced_state(l, g_bar, c, tol)
                traj.samples.append(Sample(c, p_new, det, sdim, smin))
                kind = DEAD_END if sdim > 0 or smin < 1e-2 * smin0 else STEP_FAILURE
            traj.events.append(Event(len(traj.samples) - 1, kind, f"stalled at parameter {p_new:.12g}"))
            break
        x, p = x_new, p_new
        c = sys.config_of(x)
        det, sdim, smin = _replaced_state(l, g_bar, c, tol)
        prev = traj.samples[-1].pure_condition
        traj.samples.append(Sample(c, p, det, sdim, smin))
        if np.sign(det) * np.sign(prev) < 0:
            traj.events.append(Event(len(traj.samples) - 1, SINGULAR_CROSSING, "pure condition changed sign"))
    return traj


def max_length_drift(l: Linkage, traj: Trajectory) -> float:
    """Largest relative bar-length change against the first sample."""
    c0 = traj.samples[0].config
    worst = 0.0
    for s in traj.samples:
        for i, j in l.graph.edges:
            l0 = np.linalg.norm(c0[i] - c0[j])
            worst = max(worst, abs(np.linalg.norm(s.config[i] - s.config[j]) - l0) / l0)
    return worst


# -- dead ends ---------------------------------------------------------------------

NO_EVIDENCE, PASSABLE, DEAD_END_CANDIDATE = "NoEvidence", "SingularButPassable", "DeadEndCandidate"


@dataclass(frozen=True)
class DeadEndReport:
    classification: str
    stress_dim: int
    active: bool
    forward: bool
    backward: bool
    note: str = "numerical proxy; a self-stress is necessary for a dead end, not sufficient"

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "stress_dim": self.stress_dim,
            "active": self.active,
            "forward": self.forward,
            "backward": self.backward,
            "note": self.note,
        }


def detect_dead_end(l: Linkage, c: Configuration, tol: Tolerance = DEFAULT_TOL,
                    reference: Configuration | None = None, probe: float = 1e-3) -> DeadEndReport:
    """Classify c by replaced-graph stress and a two-sided continuation probe.

    ``reference`` supplies the bar lengths c must respect; without it the
    lengths are read from c itself.
    """
    if reference is not None:
        for i, j in l.graph.edges:
            l0 = np.linalg.norm(reference[i] - reference[j])
            if abs(np.linalg.norm(c[i] - c[j]) - l0) > 1e-8 * l0:
                raise ValidationError(f"configuration violates the length of bar {(i, j)}")
    g_bar = replace_driver(l)
    _, sdim, _ = _replaced_state(l, g_bar, c, tol)
    active = is_active(l, c)
    sys = _System(l, c)
    x = sys.x_of(c)
    delta = probe * (sys.scale if l.driver.kind == PISTON else 1.0)
    ok = []
    for sign in (1, -1):
        target = sys.parameter0 + sign * delta
        if l.driver.kind != PISTON and not 0 <= target <= np.pi:
            ok.append(False)
            continue
        _, reached = sys.advance(x, sys.parameter0, target, _min_step(l, sys))
        ok.append(bool(reached == target))
    if sdim == 0:
        cls = NO_EVIDENCE
    elif all(ok):
        cls = PASSABLE
    else:
        cls = DEAD_END_CANDIDATE
    return DeadEndReport(cls, sdim, active, ok[0], ok[1])


# -- several drivers -------------------------------------------------------------

def drivers_independent(g: PinnedGraph, drivers: Sequence[Driver]) -> bool:
    """Replace every driver in turn and test the result for pinned isostaticity."""
    for d in drivers:
        _check_driver(g, d)
    h = g
    for d in drivers:
        if d.kind == PIN_ANGLE and d.vertices[0] in h.pins:
            raise ValidationError(f"vertex {d.vertices[0]!r} is pinned twice")
        if d.kind == INNER_ANGLE and d.vertices[1] not in h.vertices:
            raise ValidationError(f"apex {d.vertices[1]!r} removed by an earlier replacement")
        try:
            h = _apply(h, d)
        except ValidationError as exc:
            raise ValidationError(f"conflicting replacements: {exc}") from exc
    return pinned_framework_conditions(h).satisfied


# -- fixtures ------------------------------------------------------------------------

def fourbar_dead_center() -> tuple[Linkage, Configuration]:
    """Crank-driven four-bar whose crank cannot revolve; a, b, p2 collinear at the returned pose."""
    r5 = np.sqrt(5.0)
    c = Configuration({"p1": (0.0, 0.0), "p2": (4.0, 0.0), "a": (2.0, r5), "b": (3.0, r5 / 2)})
    from .model import FOURBAR
    return Linkage(FOURBAR, PinAngle("a", "p1", "p2")), c


def fourbar_generic(angle: float) -> Configuration:
    """A pose of the dead-center four-bar with crank angle ``angle`` (radians)."""
    a = 3.0 * np.array([np.cos(angle), np.sin(angle)])
    p2 = np.array([4.0, 0.0])
    d = np.linalg.norm(p2 - a)
    if d >= 3.0:
        raise ValidationError("crank angle outside the reachable range")
    mid = (a + p2) / 2
    h = np.sqrt(1.5**2 - (d / 2) ** 2)
    n = _perp((p2 - a) / d)
    b = mid - h * n
    return Configuration({"p1": (0.0, 0.0), "p2": (4.0, 0.0), "a": tuple(a), "b": tuple(b)})


def passable_fixture() -> tuple[Linkage, Configuration]:
    """Four-bar plus a straight, independent dyad: stressed everywhere yet free both ways."""
    g = PinnedGraph(
        inner={"a", "b", "c"},
        pins={"p1", "p2", "p3", "p4"},
        edges={("p1", "a"), ("a", "b"), ("b", "p2"), ("c", "p3"), ("c", "p4")},
    )
    c = fourbar_generic(np.pi / 6).updated({"c": (1.0, -2.0), "p3": (0.0, -2.0), "p4": (3.0, -2.0)})
    return Linkage(g, PinAngle("a", "p1", "p2")), c
