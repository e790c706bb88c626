"""Property tests for the invariants of each module."""

import networkx as nx
import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from assur_kit.assur import decompose, is_assur, verify_sufficiency
from assur_kit.counts import is_rigidity_circuit, laman_check, pinned_framework_conditions
from assur_kit.mechanism import drive, enumerate_insertions, insert_driver, max_length_drift, replace_driver
from assur_kit.model import (
    DYAD,
    TRIAD,
    Configuration,
    Framework,
    PinnedGraph,
    contract_pins,
    induced_pinned_subgraph,
)
from assur_kit.numeric import (
    bisect_pure_condition,
    equilibrium_residual,
    first_order_motions,
    motion_residual,
    pure_condition_value,
    random_generic_configuration,
    self_stresses,
    trivial_motions,
    motion_matrix,
)
from assur_kit.reciprocal import (
    dual_graph,
    motion_from_parallel_drawing,
    planar_embed,
    reciprocal_from_stress,
    stress_from_reciprocal,
    stresses_unpinned,
)
from assur_kit.singular import construct_singular_planar

from oracles import random_delaunay_framework, random_graph, random_isostatic_pinned, small_graphs

seeds = st.integers(min_value=0, max_value=2**31 - 1)
fast = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
ATLAS = [g for g in small_graphs(6) if nx.is_connected(g) and g.number_of_nodes() >= 3]


@fast
@given(seeds)
def test_contraction_keeps_edge_count(seed):
    g = random_isostatic_pinned(np.random.default_rng(seed))
    assert contract_pins(g).number_of_edges() == len(g.edges)


@fast
@given(seeds, st.data())
def test_induced_subgraph_monotone(seed, data):
    g = random_isostatic_pinned(np.random.default_rng(seed))
    vs = sorted(g.vertices)
    small = set(data.draw(st.lists(st.sampled_from(vs), unique=True)))
    big = small | set(data.draw(st.lists(st.sampled_from(vs), unique=True)))
    assert induced_pinned_subgraph(g, small).edges <= induced_pinned_subgraph(g, big).edges


def test_fixture_counts():
    for g in (DYAD, TRIAD):
        assert len(g.edges) == 2 * len(g.inner)


@fast
@given(st.sampled_from(ATLAS), st.data())
def test_laman_iff_edge_pinning_isostatic(g, data):
    u, v = data.draw(st.sampled_from(sorted(g.edges)))
    pinned = PinnedGraph(
        {str(x) for x in g.nodes if x not in (u, v)},
        {str(u), str(v)},
        {(str(a), str(b)) for a, b in g.edges if {a, b} != {u, v}},
    )
    assert laman_check(g).satisfied == pinned_framework_conditions(pinned).satisfied


@fast
@given(st.sampled_from(ATLAS))
def test_circuit_minus_edge_is_laman(g):
    if is_rigidity_circuit(g):
        for e in g.edges:
            h = g.copy()
            h.remove_edge(*e)
            assert laman_check(h).satisfied


@fast
@given(seeds)
def test_rank_nullity(seed):
    rng = np.random.default_rng(seed)
    g = random_isostatic_pinned(rng)
    extra = [(a, b) for a in sorted(g.inner) for b in sorted(g.vertices) if a != b and not g.has_edge(a, b)]
    if extra and rng.random() < 0.5:
        g = g.with_edges(add=[extra[int(rng.integers(len(extra)))]])
    elif len(g.edges) > 1:
        g = g.with_edges(remove=[sorted(g.edges)[0]])
    ids = sorted(g.vertices)
    c = Configuration.from_array(ids, rng.uniform(-5, 5, size=(len(ids), 2)))
    f = Framework(g, c)
    stresses, motions = self_stresses(f), first_order_motions(f)
    assert len(stresses) - len(motions) == len(g.edges) - 2 * len(g.inner)
    for s in stresses:
        assert equilibrium_residual(f, s) < 1e-8
    for m in motions:
        assert motion_residual(f, m) < 1e-8


@fast
@given(seeds)
def test_bisection_localizes_singularity(seed):
    rng = np.random.default_rng(seed)
    f0 = Framework(TRIAD, random_generic_configuration(TRIAD, int(rng.integers(1000))))
    f1 = Framework(TRIAD, random_generic_configuration(TRIAD, int(rng.integers(1000, 2000))))
    if np.sign(pure_condition_value(f0)) == np.sign(pure_condition_value(f1)):
        return
    assert abs(pure_condition_value(bisect_pure_condition(f0, f1))) <= 1e-10


@fast
@given(seeds)
def test_nontrivial_motions_orthogonal_to_trivial(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 7)
    ids = sorted(g.vertices)
    f = Framework(g, Configuration.from_array(ids, rng.uniform(-5, 5, size=(len(ids), 2))))
    assert len(first_order_motions(f)) >= 3
    nontrivial = first_order_motions(f, nontrivial=True)
    if nontrivial:
        m = motion_matrix(nontrivial, ids)
        assert np.abs(trivial_motions(f).T @ m).max() < 1e-8


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_decompose_components_are_assur_and_sources_use_pins(seed):
    g = random_isostatic_pinned(np.random.default_rng(seed))
    s = decompose(g)
    assert s == decompose(g)
    dag = s.dag()
    for k, c in enumerate(s.components):
        assert is_assur(c)
        if dag.in_degree(k) == 0:
            assert c.pins <= g.pins


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_sufficiency_implies_assur(seed):
    rng = np.random.default_rng(seed)
    g = random_isostatic_pinned(rng, 5)
    f = Framework(g, random_generic_configuration(g, int(rng.integers(1000))))
    if verify_sufficiency(f):
        assert is_assur(g)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_reciprocal_roundtrip_and_parallelism(seed):
    rng = np.random.default_rng(seed)
    f = random_delaunay_framework(rng)
    basis = stresses_unpinned(f)
    if not basis:
        return
    w = rng.normal(size=len(basis))
    s = type(basis[0])({e: sum(c * b[e] for c, b in zip(w, basis)) for e in f.graph.edges})
    r = reciprocal_from_stress(f, s)
    back = stress_from_reciprocal(f, r)
    edges = f.graph.sorted_edges()
    a, b = np.array([s[e] for e in edges]), np.array([back[e] for e in edges])
    k = np.dot(a, b) / np.dot(a, a)
    assert np.linalg.norm(b - k * a) <= 1e-8 * np.linalg.norm(b)


def test_dual_of_planar_circuits_is_circuit():
    wheel = nx.wheel_graph(5)
    for g in (nx.complete_graph(4), wheel):
        assert is_rigidity_circuit(g)
        e = planar_embed(PinnedGraph.unpinned([(str(u), str(v)) for u, v in g.edges]))
        assert is_rigidity_circuit(dual_graph(e), allow_multi=True)


@fast
@given(seeds)
def test_parallel_drawing_motion_is_exact(seed):
    rng = np.random.default_rng(seed)
    cert = construct_singular_planar(TRIAD, seed=int(rng.integers(50)))
    f = cert.framework
    m = motion_from_parallel_drawing(f, cert.stages["parallel_drawing"], tol=1e-6)
    assert motion_residual(f, m) <= 1e-9 * f.config.diameter() * max(np.hypot(*m[v]) for v in f.graph.inner)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_insertions_round_trip_on_random_assur(seed):
    rng = np.random.default_rng(seed)
    g = random_isostatic_pinned(rng, 5)
    comps = decompose(g).components
    a = max(comps, key=lambda c: len(c.inner))
    for spec in enumerate_insertions(a):
        assert replace_driver(insert_driver(a, spec)) == a


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=0.5, max_value=3.0), st.floats(min_value=0.3, max_value=2.8))
def test_trajectory_bar_drift(x, y):
    from assur_kit.mechanism import InsertionSpec

    l = insert_driver(DYAD, InsertionSpec("piston", ("a", "p1")))
    c = Configuration({"a": (x, y), "p1": (0, 0), "p2": (3, 0)})
    t = drive(l, c, 1e-2, 20)
    assert max_length_drift(l, t) <= 1e-8
