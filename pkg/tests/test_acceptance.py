"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion."""

import time
from collections import Counter

import numpy as np
import pytest

from assur_kit.assur import characterization_crosscheck, decompose, verify_sufficiency
from assur_kit.counts import generic_dof, generic_rank_unpinned, is_rigidity_circuit, laman_check
from assur_kit.mechanism import (
    DEAD_END_CANDIDATE,
    NO_EVIDENCE,
    InsertionSpec,
    detect_dead_end,
    drive,
    enumerate_insertions,
    fourbar_dead_center,
    fourbar_generic,
    insert_driver,
    max_length_drift,
    replace_driver,
)
from assur_kit.model import DYAD, K4, K33_ASSUR, STACKED_DYADS, TRIAD, Configuration, Framework
from assur_kit.numeric import build_rigidity_matrix, first_order_motions, numeric_rank, self_stresses
from assur_kit.reciprocal import (
    bow_insert_crossings,
    motions_transfer_check,
    reciprocal_from_stress,
    stress_from_reciprocal,
    stresses_unpinned,
)
from assur_kit.singular import (
    collinearity_residual,
    concurrency_residual,
    construct_singular_nonplanar,
    construct_singular_planar,
    leg_lines,
)

from oracles import (
    brute_circuit,
    brute_laman,
    random_delaunay_framework,
    random_graph,
    random_isostatic_pinned,
    random_relabel,
    small_graphs,
)


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return emit


def _sample_rank(g, rng):
    ids = sorted(g.vertices)
    c = Configuration.from_array(ids, rng.uniform(-10, 10, size=(len(ids), 2)))
    return numeric_rank(build_rigidity_matrix(Framework(g, c)))


def test_1_rank_identities(report):
    start = time.perf_counter()
    f = Framework(K4, Configuration({"1": (0, 0), "2": (4, 0), "3": (1, 3), "4": (1.5, 1)}))
    k4_rank = numeric_rank(build_rigidity_matrix(f))
    k4_stress = len(self_stresses(f))
    rng = np.random.default_rng(20240501)
    mismatches = 0
    for _ in range(200):
        g = random_graph(rng, 12)
        expected = generic_rank_unpinned(g)
        if _sample_rank(g, rng) != expected and _sample_rank(g, rng) != expected:
            mismatches += 1
    elapsed = time.perf_counter() - start
    ok = k4_rank == 5 and k4_stress == 1 and mismatches == 0 and elapsed < 10
    report(1, ok, f"K4 rank={k4_rank} stress_dim={k4_stress} mismatches={mismatches}/200 time={elapsed:.2f}s")


def test_2_laman_circuit_suite(report):
    start = time.perf_counter()
    laman_bad = circuit_bad = total = 0
    for g in small_graphs(6):
        total += 1
        laman_bad += laman_check(g).satisfied != brute_laman(g)
        circuit_bad += is_rigidity_circuit(g) != brute_circuit(list(g.edges))
    elapsed = time.perf_counter() - start
    ok = laman_bad == 0 and circuit_bad == 0 and elapsed < 60
    report(2, ok, f"graphs={total} laman_disagree={laman_bad} circuit_disagree={circuit_bad} time={elapsed:.2f}s")


def test_3_characterization_agreement(report):
    rng = np.random.default_rng(7)
    graphs = [DYAD, TRIAD, STACKED_DYADS] + [random_isostatic_pinned(rng, 8) for _ in range(100)]
    bad = [g for g in graphs if not characterization_crosscheck(g).agree]
    report(3, not bad, f"graphs={len(graphs)} disagreements={len(bad)}")


def test_4_decomposition_uniqueness(report):
    rng = np.random.default_rng(11)
    fixtures = [DYAD, TRIAD, STACKED_DYADS, K33_ASSUR] + [random_isostatic_pinned(rng, 8) for _ in range(4)]
    relabel_bad = recompose_bad = 0
    for g in fixtures:
        s = decompose(g)
        recompose_bad += s.recompose().edges != g.edges
        for _ in range(20):
            m = random_relabel(g, rng)
            relabel_bad += decompose(g.relabel(m)).canonical() != s.canonical(m)
    ok = relabel_bad == 0 and recompose_bad == 0
    report(4, ok, f"fixtures={len(fixtures)} relabel_mismatch={relabel_bad} recompose_mismatch={recompose_bad}")


def _roundtrip(f, rng):
    basis = stresses_unpinned(f)
    w = rng.normal(size=len(basis))
    s = type(basis[0])({e: sum(c * b[e] for c, b in zip(w, basis)) for e in f.graph.edges})
    r = reciprocal_from_stress(f, s)
    back = stress_from_reciprocal(f, r)
    edges = f.graph.sorted_edges()
    a, b = np.array([s[e] for e in edges]), np.array([back[e] for e in edges])
    k = np.dot(a, b) / np.dot(a, a)
    return np.linalg.norm(b - k * a) / np.linalg.norm(b), r.closure_residual / r.dual_config.diameter()


def test_5_reciprocal_roundtrip(report):
    rng = np.random.default_rng(5)
    frames = [Framework(K4, Configuration({"1": (0, 0), "2": (4, 0), "3": (1, 3), "4": (1.5, 1)}))]
    while len(frames) < 21:
        f = random_delaunay_framework(rng)
        if stresses_unpinned(f):
            frames.append(f)
    results = [_roundtrip(f, rng) for f in frames]
    err = max(r[0] for r in results)
    closure = max(r[1] for r in results)
    report(5, err <= 1e-8 and closure <= 1e-7, f"frameworks={len(frames)} max_rel_err={err:.2e} max_closure/diam={closure:.2e}")


def _margins(cert):
    lam = np.abs([cert.stress[e] for e in cert.framework.graph.edges])
    speed = np.array([np.linalg.norm(cert.motion[v]) for v in cert.framework.graph.inner])
    return lam.min() / lam.max(), speed.min() / speed.max()


def test_6_singular_synthesis(report):
    details, ok = [], True
    for name, g in (("DYAD", DYAD), ("TRIAD", TRIAD)):
        start = time.perf_counter()
        cert = construct_singular_planar(g, seed=0)
        elapsed = time.perf_counter() - start
        f = cert.framework
        sdim, mdim = len(self_stresses(f)), len(first_order_motions(f))
        sm, mm = _margins(cert)
        if g is DYAD:
            geom = collinearity_residual([f.config[v] for v in ("a", "p1", "p2")])
        else:
            geom = concurrency_residual(leg_lines(f))
        suff = verify_sufficiency(f)
        ok &= sdim == 1 and mdim == 1 and sm >= 1e-6 and mm >= 1e-6 and geom <= 1e-6 and suff and elapsed < 5
        details.append(f"{name}: dims={sdim}/{mdim} margins={sm:.2e}/{mm:.2e} geom={geom:.1e} suff={suff} t={elapsed:.2f}s")
    report(6, ok, "; ".join(details))


K33_SKETCH = [(("A1", "B1"), ("A2", "B2"))]


def _crossed_k33(rng):
    ids = sorted(K33_ASSUR.vertices)
    return Framework(K33_ASSUR, Configuration.from_array(ids, rng.uniform(-10, 10, size=(len(ids), 2))))


def test_7_bow_transfer(report):
    square = Framework(K4, Configuration({"1": (0, 0), "2": (2, 0), "3": (2, 2), "4": (0, 2)}))
    k33 = _crossed_k33(np.random.default_rng(3))
    cases = [
        ("crossed_square", square, [(("1", "3"), ("2", "4"))]),
        ("k33_assur", k33, K33_SKETCH),
        ("k33_singular", construct_singular_nonplanar(K33_ASSUR, K33_SKETCH, seed=0).framework, K33_SKETCH),
    ]
    details, ok = [], True
    for name, f, sketch in cases:
        r = motions_transfer_check(f, bow_insert_crossings(f, sketch))
        ok &= r.passed
        details.append(f"{name}: stress={r.stress_dims} motion={r.motion_dims} angle={r.angle_residual:.1e}")
    report(7, ok, "; ".join(details))


def _inner_speed_ratio(g):
    rng = np.random.default_rng(1)
    ids = sorted(g.vertices)
    f = Framework(g, Configuration.from_array(ids, rng.uniform(-10, 10, size=(len(ids), 2))))
    motions = first_order_motions(f)
    if len(motions) != 1:
        return 0.0
    speed = np.array([np.linalg.norm(motions[0][v]) for v in g.inner])
    return speed.min() / speed.max()


def test_8_driver_calculus(report):
    roundtrip_bad = dof_bad = 0
    worst_speed = 1.0
    for g in (DYAD, TRIAD):
        for spec in enumerate_insertions(g):
            l = insert_driver(g, spec)
            roundtrip_bad += replace_driver(l) != g
            dof_bad += generic_dof(l.graph) != 1
            worst_speed = min(worst_speed, _inner_speed_ratio(l.graph))
    tallies = [dict(Counter(s.kind for s in enumerate_insertions(g))) for g in (DYAD, TRIAD)]
    tallies_ok = tallies == [{"piston": 2, "two_valent": 2}, {"piston": 6, "angle": 3, "two_valent": 6, "pin_demotion": 3}]
    l, c = fourbar_dead_center()
    dead = detect_dead_end(l, c)
    generic = [detect_dead_end(l, fourbar_generic(a)).classification for a in np.linspace(0.1, 0.8, 10)]
    ok = (roundtrip_bad == 0 and dof_bad == 0 and worst_speed >= 1e-6 and tallies_ok
          and dead.classification == DEAD_END_CANDIDATE and dead.stress_dim >= 1
          and all(x == NO_EVIDENCE for x in generic))
    report(8, ok, f"roundtrip_bad={roundtrip_bad} dof_bad={dof_bad} min_speed_ratio={worst_speed:.2e} "
                  f"tallies_ok={tallies_ok} dead_center={dead.classification} "
                  f"generic_no_evidence={sum(x == NO_EVIDENCE for x in generic)}/10")


def test_9_piston_arc(report):
    p1, p2 = np.array([0.0, 0.0]), np.array([4.0, 0.0])
    a0 = p2 + 3.0 * np.array([np.cos(np.radians(120)), np.sin(np.radians(120))])
    l = insert_driver(DYAD, InsertionSpec("piston", ("a", "p1")))
    c = Configuration({"a": tuple(a0), "p1": tuple(p1), "p2": tuple(p2)})
    t = drive(l, c, 1e-3, 1000)
    L0 = np.linalg.norm(a0 - p1)
    err = 0.0
    for k, s in enumerate(t.samples):
        # circle |x| = L meets circle |x - p2| = 3 above the axis
        L = L0 + k * 1e-3
        x = (L**2 + 7.0) / 8.0
        exact = np.array([x, np.sqrt(L**2 - x**2)])
        err = max(err, float(np.linalg.norm(s.config["a"] - exact)))
    drift = max_length_drift(l, t)
    ok = len(t.samples) == 1001 and not t.events and err <= 1e-7 and drift <= 1e-8
    report(9, ok, f"samples={len(t.samples)} max_err={err:.2e} drift={drift:.2e}")
