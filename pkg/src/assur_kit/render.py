"""Deterministic SVG output for frameworks, reciprocal pairs, certificates and trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import Configuration, Edge, Framework, ValidationError

ROLES = ("inner", "pin", "bar", "driver", "reciprocal", "velocity")

DEFAULT_STYLES = {
    "inner": {"fill": "#ffffff", "stroke": "#000000"},
    "pin": {"fill": "#000000", "stroke": "#000000"},
    "bar": {"stroke": "#333333"},
    "driver": {"stroke": "#c03030"},
    "reciprocal": {"stroke": "#3060c0"},
    "velocity": {"stroke": "#208040"},
}


@dataclass(frozen=True)
class RenderSpec:
    width: int = 480
    height: int = 480
    margin: int = 24
    radius: float = 4.0
    styles: Mapping[str, Mapping[str, str]] = field(default_factory=lambda: DEFAULT_STYLES)
    show_velocity: bool = True
    show_stress: bool = True

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("render dimensions must be positive")
        missing = [r for r in ROLES if r not in self.styles]
        if missing:
            raise ValidationError(f"styles missing roles {missing}")


def _num(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _attrs(style: Mapping[str, str], **extra) -> str:
    items = dict(style)
    items.update({k.replace("_", "-"): v for k, v in extra.items()})
    return " ".join(f'{k}="{v}"' for k, v in sorted(items.items()))


class _Frame:
    """Maps world coordinates of one panel into pixels (y up)."""

    def __init__(self, points: Iterable[np.ndarray], box: tuple[float, float, float, float]):
        pts = np.array(list(points), float)
        if pts.size == 0:
            raise ValidationError("nothing to draw")
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = max(float(np.max(hi - lo)), 1e-12)
        x0, y0, w, h = box
        self.s = min(w, h) / span
        self.lo, self.hi = lo, hi
        self.off = np.array([x0 + (w - self.s * (hi[0] - lo[0])) / 2, y0 + (h + self.s * (hi[1] - lo[1])) / 2])

    def __call__(self, p: np.ndarray) -> tuple[str, str]:
        x = self.off[0] + self.s * (p[0] - self.lo[0])
        y = self.off[1] - self.s * (p[1] - self.lo[1])
        return _num(x), _num(y)


def _segments(out: list, frame: _Frame, config: Configuration, edges: Sequence[Edge], style, widths=None):
    for k, (i, j) in enumerate(edges):
        (x1, y1), (x2, y2) = frame(config[i]), frame(config[j])
        w = _num(widths[k]) if widths is not None else "1.5"
        out.append(f'<line {_attrs(style, x1=x1, y1=y1, x2=x2, y2=y2, stroke_width=w)} data-edge="{i}-{j}"/>')


def _framework_group(out, frame, f: Framework, spec: RenderSpec, stress=None, velocity=None, driver=None):
    edges = f.graph.sorted_edges()
    widths = None
    if stress is not None and spec.show_stress:
        lam = np.array([abs(stress[e]) for e in edges])
        widths = 0.75 + 3.0 * lam / max(lam.max(), 1e-300)
    _segments(out, frame, f.config, edges, spec.styles["bar"], widths)
    if driver is not None:
        (x1, y1), (x2, y2) = frame(f.config[driver[0]]), frame(f.config[driver[1]])
        out.append(f'<line {_attrs(spec.styles["driver"], x1=x1, y1=y1, x2=x2, y2=y2, stroke_dasharray="4 3")}/>')
    if velocity is not None and spec.show_velocity:
        vmax = max((float(np.hypot(*velocity[v])) for v in f.graph.inner), default=0.0)
        if vmax > 0:
            length = 0.15 * max(f.config.diameter(), 1e-12) / vmax
            for v in sorted(f.graph.inner):
                p = f.config[v]
                (x1, y1), (x2, y2) = frame(p), frame(p + length * velocity[v])
                out.append(f'<line {_attrs(spec.styles["velocity"], x1=x1, y1=y1, x2=x2, y2=y2)} data-velocity="{v}"/>')
    for v in sorted(f.graph.vertices):
        role = "pin" if v in f.graph.pins else "inner"
        cx, cy = frame(f.config[v])
        out.append(f'<circle {_attrs(spec.styles[role], cx=cx, cy=cy, r=_num(spec.radius))} data-vertex="{v}"/>')


def _document(spec: RenderSpec, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" height="{spec.height}" '
            f'viewBox="0 0 {spec.width} {spec.height}">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


def render_svg(scene, spec: RenderSpec | None = None) -> str:
    """SVG text for a Framework, ReciprocalDiagram, SingularCertificate or (Linkage, Trajectory)."""
    from .mechanism import Linkage, Trajectory
    from .reciprocal import ReciprocalDiagram
    from .singular import SingularCertificate

    spec = spec or RenderSpec()
    m = spec.margin
    full = (m, m, spec.width - 2 * m, spec.height - 2 * m)
    body: list[str] = []
    if scene is None or (isinstance(scene, (list, tuple)) and not scene):
        raise ValidationError("empty scene")
    if isinstance(scene, Framework):
        frame = _Frame(scene.config.points.values(), full)
        body.append('<g id="framework">')
        _framework_group(body, frame, scene, spec)
        body.append("</g>")
    elif isinstance(scene, SingularCertificate):
        f = scene.framework
        frame = _Frame(f.config.points.values(), full)
        body.append('<g id="certificate">')
        _framework_group(body, frame, f, spec, stress=scene.stress, velocity=scene.motion)
        body.append("</g>")
    elif isinstance(scene, ReciprocalDiagram):
        half = (spec.width - 3 * m) / 2
        f = scene.framework
        left = _Frame(f.config.points.values(), (m, m, half, spec.height - 2 * m))
        right = _Frame(scene.dual_config.points.values(), (2 * m + half, m, half, spec.height - 2 * m))
        body.append('<g id="primal">')
        _framework_group(body, left, f, spec)
        body.append("</g>")
        body.append('<g id="reciprocal">')
        for e in f.graph.sorted_edges():
            h, k = scene.dual_edge(e)
            (x1, y1), (x2, y2) = right(scene.dual_config[h]), right(scene.dual_config[k])
            body.append(f'<line {_attrs(spec.styles["reciprocal"], x1=x1, y1=y1, x2=x2, y2=y2)} '
                        f'data-edge="{e[0]}-{e[1]}"/>')
        body.append("</g>")
    elif isinstance(scene, tuple) and len(scene) == 2 and isinstance(scene[0], Linkage) \
            and isinstance(scene[1], Trajectory):
        l, traj = scene
        if not traj.samples:
            raise ValidationError("empty trajectory")
        frame = _Frame([p for s in traj.samples for p in s.config.array(sorted(l.graph.vertices))], full)
        stride = max(1, len(traj.samples) // 24)
        picked = traj.samples[::stride]
        if picked[-1] is not traj.samples[-1]:
            picked.append(traj.samples[-1])
        for k, s in enumerate(picked):
            body.append(f'<g class="pose" data-index="{k}" opacity="{_num(0.25 + 0.75 * (k + 1) / len(picked))}">')
            _framework_group(body, frame, Framework(l.graph, s.config), spec, driver=l.driver.virtual_bar())
            body.append("</g>")
    else:
        raise ValidationError(f"cannot render {type(scene).__name__}")
    return _document(spec, body)
