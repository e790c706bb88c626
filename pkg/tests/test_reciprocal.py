import numpy as np
import pytest

from assur_kit.model import DYAD, K4, Configuration, Framework, PinnedGraph, ValidationError
from assur_kit.reciprocal import (
    NotPlanar,
    NotPlanarError,
    ParallelDrawing,
    bow_insert_crossings,
    check_parallel,
    dual_graph,
    motion_from_parallel_drawing,
    motions_transfer_check,
    planar_embed,
    reciprocal_from_stress,
    require_embedding,
    stress_from_reciprocal,
    stresses_unpinned,
)


def k4():
    return Framework(K4, Configuration({"1": (0, 0), "2": (4, 0), "3": (1, 3), "4": (1.5, 1)}))


def test_k4_embedding_euler():
    e = planar_embed(K4)
    assert len(e.faces) == 4
    assert e.euler_characteristic() == 2
    assert dual_graph(e).number_of_edges() == 6


def test_k33_not_planar_with_witness():
    g = PinnedGraph.unpinned([(a, b) for a in "abc" for b in "xyz"])
    r = planar_embed(g)
    assert isinstance(r, NotPlanar) and len(r.witness) >= 9
    with pytest.raises(NotPlanarError):
        require_embedding(g)


def test_k4_roundtrip_and_parallel_duals():
    f = k4()
    (s,) = stresses_unpinned(f)
    r = reciprocal_from_stress(f, s)
    back = stress_from_reciprocal(f, r)
    ratios = [back[e] / s[e] for e in K4.sorted_edges()]
    assert np.allclose(ratios, 1.0, rtol=1e-10)
    for e in K4.sorted_edges():
        h, k = r.dual_edge(e)
        d = f.config[e[0]] - f.config[e[1]]
        w = r.dual_config[h] - r.dual_config[k]
        assert abs(d[0] * w[1] - d[1] * w[0]) < 1e-10


def test_collinear_triangle_has_two_dual_points():
    tri = PinnedGraph.unpinned([("0", "1"), ("1", "2"), ("0", "2")])
    f = Framework(tri, Configuration({"0": (0, 0), "1": (1, 0), "2": (3, 0)}))
    (s,) = stresses_unpinned(f)
    r = reciprocal_from_stress(f, s)
    assert len(r.dual_config) == 2


def test_reciprocal_rejects_unbalanced_stress():
    f = k4()
    (s,) = stresses_unpinned(f)
    bad = type(s)({e: v + (0.1 if e == ("1", "2") else 0) for e, v in s.values.items()})
    with pytest.raises(ValidationError):
        reciprocal_from_stress(f, bad)


def test_bow_on_crossed_square_preserves_spaces():
    f = Framework(K4, Configuration({"1": (0, 0), "2": (2, 0), "3": (2, 2), "4": (0, 2)}))
    fb = bow_insert_crossings(f, [(("1", "3"), ("2", "4"))])
    assert np.allclose(fb.framework.config["x0"], [1, 1])
    assert len(fb.chains[("1", "3")]) == 2
    r = motions_transfer_check(f, fb)
    assert r.passed, r


def test_bow_rejects_parallel_and_adjacent():
    f = Framework(K4, Configuration({"1": (0, 0), "2": (2, 0), "3": (2, 2), "4": (0, 2)}))
    with pytest.raises(ValidationError):
        bow_insert_crossings(f, [(("1", "2"), ("3", "4"))])
    with pytest.raises(ValidationError):
        bow_insert_crossings(f, [(("1", "2"), ("1", "3"))])


def test_parallel_drawing_of_collinear_dyad_gives_vertical_motion():
    f = Framework(DYAD, Configuration({"a": (1, 0), "p1": (0, 0), "p2": (3, 0)}))
    pd = ParallelDrawing(Configuration({"a": (1.5, 0), "p1": (0, 0), "p2": (3, 0)}), f)
    assert check_parallel(pd) == 0
    m = motion_from_parallel_drawing(f, pd)
    assert np.allclose(m["a"], [0, 0.5])


def test_parallel_drawing_must_fix_pins():
    f = Framework(DYAD, Configuration({"a": (1, 0), "p1": (0, 0), "p2": (3, 0)}))
    pd = ParallelDrawing(Configuration({"a": (1, 0), "p1": (-1, 0), "p2": (3, 0)}), f)
    with pytest.raises(ValidationError):
        motion_from_parallel_drawing(f, pd)
