import json
import re
from pathlib import Path

import numpy as np
import pytest

from assur_kit.cli import main
from assur_kit.io import SchemaError, dumps, framework_to_dict, parse_framework, parse_linkage
from assur_kit.model import DYAD, K4, Configuration, Framework, ValidationError
from assur_kit.reciprocal import reciprocal_from_stress, stresses_unpinned
from assur_kit.render import RenderSpec, render_svg
from assur_kit.singular import construct_singular_planar

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def test_parse_dyad_document():
    assert parse_framework((DATA / "dyad.json").read_text()) == DYAD


def test_missing_pins_names_path():
    with pytest.raises(SchemaError) as exc:
        parse_framework('{"inner": ["a"], "edges": []}')
    assert exc.value.path == "$.pins"


def test_unknown_vertex_in_edge():
    with pytest.raises(ValidationError) as exc:
        parse_framework('{"inner": ["a"], "pins": ["p"], "edges": [["a", "q"]]}')
    assert "$.edges[0]" in str(exc.value)


def test_bad_point_path():
    text = '{"inner": ["a"], "pins": ["p"], "edges": [["a", "p"]], "config": {"a": [0], "p": [1, 1]}}'
    with pytest.raises(SchemaError) as exc:
        parse_framework(text)
    assert exc.value.path == "$.config.a"


def test_framework_roundtrips_through_json():
    f = parse_framework((DATA / "dyad_config.json").read_text())
    assert parse_framework(dumps(framework_to_dict(f))) == f


def test_linkage_parse():
    l, c = parse_linkage((DATA / "dyad_piston.json").read_text())
    assert l.driver.kind == "piston" and c is not None


def test_check_dyad(capsys):
    code, out = run(capsys, "check", DATA / "dyad.json")
    assert code == 0 and json.loads(out)["satisfied"] is True


def test_check_fourbar_negative(capsys):
    code, _ = run(capsys, "check", DATA / "fourbar.json")
    assert code == 1


def test_decompose_fourbar_input_error(capsys):
    code, _ = run(capsys, "decompose", DATA / "fourbar.json")
    assert code == 2


def test_singular_triad(capsys, tmp_path):
    svg = tmp_path / "cert.svg"
    code, out = run(capsys, "singular", DATA / "triad.json", "--svg", svg)
    doc = json.loads(out)
    assert code == 0 and doc["stress_dim"] == 1 and doc["motion_dim"] == 1
    assert svg.read_text().startswith("<svg")


def test_singular_numeric_flag(capsys):
    code, out = run(capsys, "singular", DATA / "triad.json", "--numeric")
    assert code == 0 and json.loads(out)["motion_dim"] == 1


def test_singular_with_sketch(capsys):
    code, out = run(capsys, "singular", DATA / "k33_sketch.json")
    assert code == 0 and json.loads(out)["stress_dim"] == 1


def test_singular_non_assur_negative(capsys):
    code, _ = run(capsys, "singular", DATA / "fourbar.json")
    assert code == 1


def test_reciprocal_k4(capsys, tmp_path):
    code, out = run(capsys, "reciprocal", DATA / "k4.json", "--svg", tmp_path / "r.svg")
    assert code == 0 and json.loads(out)["closure_residual"] < 1e-9


def test_drive_and_deadend(capsys):
    code, out = run(capsys, "drive", DATA / "dyad_piston.json", "--steps", 5, "--step", 0.01)
    assert code == 0 and len(json.loads(out)["samples"]) == 6
    code, out = run(capsys, "deadend", DATA / "crank_linkage.json", "--config", DATA / "dead_center.json")
    assert code == 0 and json.loads(out)["classification"] == "DeadEndCandidate"


def test_unknown_command_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "x.json"])
    assert exc.value.code == 2


def test_missing_file_exit_two(capsys):
    code, _ = run(capsys, "check", DATA / "nope.json")
    assert code == 2


def test_outputs_byte_identical(capsys):
    _, a = run(capsys, "singular", DATA / "triad.json", "--seed", 3)
    _, b = run(capsys, "singular", DATA / "triad.json", "--seed", 3)
    assert a == b


def test_dyad_svg_matches_golden():
    f = parse_framework((DATA / "dyad_config.json").read_text())
    assert render_svg(f) == (GOLDEN / "dyad_config.svg").read_text()


def test_dyad_svg_element_counts():
    svg = render_svg(parse_framework((DATA / "dyad_config.json").read_text()))
    assert svg.count("<circle") == 3 and svg.count("<line") == 2


def _segments(svg, group):
    block = svg.split(f'<g id="{group}">')[1].split("</g>")[0]
    out = {}
    for m in re.finditer(r'<line ([^>]*)/>', block):
        attrs = dict(re.findall(r'([\w-]+)="([^"]*)"', m.group(1)))
        out[attrs["data-edge"]] = np.array([float(attrs[k]) for k in ("x1", "y1", "x2", "y2")])
    return out


def test_reciprocal_svg_partner_edges_parallel():
    f = Framework(K4, Configuration({"1": (0, 0), "2": (4, 0), "3": (1, 3), "4": (1.5, 1)}))
    svg = render_svg(reciprocal_from_stress(f, stresses_unpinned(f)[0]))
    primal, dual = _segments(svg, "primal"), _segments(svg, "reciprocal")
    assert primal.keys() == dual.keys()
    for e, (x1, y1, x2, y2) in primal.items():
        u = np.array([x2 - x1, y2 - y1])
        w = dual[e][2:] - dual[e][:2]
        # three-decimal rounding bounds the parallelism error
        assert abs(u[0] * w[1] - u[1] * w[0]) <= 5e-3 * (np.linalg.norm(u) + np.linalg.norm(w)) + 1e-9


def test_certificate_svg_has_velocity_arrows():
    svg = render_svg(construct_singular_planar(DYAD))
    assert svg.count("data-velocity") == 1


def test_empty_scene_and_bad_spec():
    with pytest.raises(ValidationError):
        render_svg(None)
    with pytest.raises(ValidationError):
        render_svg([])
    with pytest.raises(ValidationError):
        RenderSpec(width=0)
    with pytest.raises(ValidationError):
        RenderSpec(styles={"inner": {}})
