"""Command line entry point: ``assur-kit <command> <file.json> [options]``.

Exit codes: 0 success, 1 analysis-negative (not Assur, no stress, inactive
driver, ...), 2 input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io
from .assur import NotIsostaticError, decompose, is_assur, stress_motion_report
from .counts import pinned_framework_conditions
from .mechanism import detect_dead_end, drive, is_active
from .model import Framework, PinnedGraph, ValidationError
from .numeric import Tolerance, analyze, random_generic_configuration
from .reciprocal import ClosureError, NotPlanarError, reciprocal_from_stress, stresses_unpinned
from .render import render_svg
from .singular import (
    ConstructionError,
    NotAssurError,
    NotFound,
    construct_singular_nonplanar,
    construct_singular_planar,
    numeric_singular_search,
)

OK, NEGATIVE, INPUT_ERROR = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(INPUT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="assur-kit", description="Assur graphs, singular realizations and drivers.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("file", type=Path)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--tol", type=float, default=1e-9, help="relative rank tolerance")
        return s

    add("check", "pinned counts and Assur test")
    add("analyze", "rank, motions and stresses at a configuration")
    add("decompose", "Assur scheme of a pinned isostatic graph")
    s = add("singular", "realization with a full self-stress and a full motion")
    s.add_argument("--numeric", action="store_true", help="numeric search instead of the construction")
    s.add_argument("--svg", type=Path)
    s = add("reciprocal", "reciprocal diagram of the framework's self-stress")
    s.add_argument("--svg", type=Path)
    s = add("drive", "follow the driven motion of a linkage")
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--step", type=float, default=1e-2)
    s.add_argument("--svg", type=Path)
    s = add("deadend", "classify a linkage pose")
    s.add_argument("--config", type=Path, help="pose to classify (defaults to the linkage's own)")
    return p


def _emit(doc) -> None:
    sys.stdout.write(io.dumps(doc) + "\n")


def _framework(g: PinnedGraph, c, seed: int) -> Framework:
    return Framework(g, c if c is not None else random_generic_configuration(g, seed))


def _check(args, tol) -> int:
    g, _, _ = io.parse_document(args.file.read_text())
    report = pinned_framework_conditions(g)
    doc = report.to_dict()
    doc["assur"] = is_assur(g)
    _emit(doc)
    return OK if report.satisfied else NEGATIVE


def _analyze(args, tol) -> int:
    g, c, _ = io.parse_document(args.file.read_text())
    f = _framework(g, c, args.seed)
    doc = analyze(f, tol)
    rep = stress_motion_report(f, tol)
    doc.update({
        "config": {v: list(xy) for v, xy in f.config.points.items()},
        "assur": is_assur(g),
        "stress_motion_certificate": rep.holds,
    })
    _emit(doc)
    return OK


def _decompose(args, tol) -> int:
    g, _, _ = io.parse_document(args.file.read_text())
    _emit(decompose(g).to_dict())
    return OK


def _singular(args, tol) -> int:
    g, _, doc = io.parse_document(args.file.read_text())
    crossings = io.parse_crossings(doc)
    if not is_assur(g):
        _emit({"error": "graph is not Assur"})
        return NEGATIVE
    if args.numeric:
        cert = numeric_singular_search(g, seed=args.seed, tol=tol)
        if isinstance(cert, NotFound):
            _emit({"found": False, "tried": cert.tried, "reason": cert.reason})
            return NEGATIVE
    elif crossings:
        cert = construct_singular_nonplanar(g, crossings, seed=args.seed, tol=tol)
    else:
        cert = construct_singular_planar(g, seed=args.seed, tol=tol)
    _emit(cert.to_dict())
    if args.svg:
        args.svg.write_text(render_svg(cert))
    return OK


def _reciprocal(args, tol) -> int:
    g, c, _ = io.parse_document(args.file.read_text())
    if c is None:
        raise ValidationError("reciprocal needs a configuration")
    f = Framework(g, c)
    stresses = stresses_unpinned(f, tol)
    if not stresses:
        _emit({"error": "framework carries no self-stress"})
        return NEGATIVE
    r = reciprocal_from_stress(f, stresses[0])
    _emit({
        "dual_config": {n: list(xy) for n, xy in r.dual_config.points.items()},
        "dual_edges": {f"{u}-{v}": list(r.dual_edge((u, v))) for u, v in g.sorted_edges()},
        "stress": {f"{u}-{v}": stresses[0][(u, v)] for u, v in g.sorted_edges()},
        "closure_residual": r.closure_residual,
    })
    if args.svg:
        args.svg.write_text(render_svg(r))
    return OK


def _drive(args, tol) -> int:
    l, c = io.parse_linkage(args.file.read_text())
    if c is None:
        raise ValidationError("drive needs a starting configuration")
    if not is_active(l, c):
        _emit({"error": "driver is not active at the starting configuration"})
        return NEGATIVE
    traj = drive(l, c, args.step, args.steps, tol)
    _emit(traj.to_dict())
    if args.svg:
        args.svg.write_text(render_svg((l, traj)))
    return OK


def _deadend(args, tol) -> int:
    l, c = io.parse_linkage(args.file.read_text())
    pose = io.parse_config(args.config.read_text()) if args.config else c
    if pose is None:
        raise ValidationError("deadend needs a configuration")
    pose = pose.restricted(sorted(l.graph.vertices))
    reference = c if args.config else None
    _emit(detect_dead_end(l, pose, tol, reference=reference).to_dict())
    return OK


COMMANDS = {
    "check": _check,
    "analyze": _analyze,
    "decompose": _decompose,
    "singular": _singular,
    "reciprocal": _reciprocal,
    "drive": _drive,
    "deadend": _deadend,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        tol = Tolerance(rank_rel=args.tol)
        return COMMANDS[args.command](args, tol)
    except (NotAssurError, ConstructionError, ClosureError) as exc:
        sys.stderr.write(f"assur-kit: {exc}\n")
        return NEGATIVE
    except (NotIsostaticError, NotPlanarError, ValidationError, OSError, KeyError, ValueError) as exc:
        sys.stderr.write(f"assur-kit: {exc}\n")
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
