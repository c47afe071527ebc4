"""Ordered 2D drawing tree, SVG 1.1 serialization, legends and the
axonometric prism projection shared by every extruded renderer.

Screen space is SVG pixel space: x to the right, y downward. Nodes are
drawn in list order. Serialization is byte-deterministic: numbers are
always written with three fractional digits and attributes in fixed order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union
from xml.sax.saxutils import escape, quoteattr

from .classify import AlphaScale, Breaks, Palette, darken, gray_ramp

Point = tuple[float, float]


def fmt(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


@dataclass
class Style:
    fill: str = "none"
    stroke: str | None = None
    stroke_width: float | None = None
    fill_opacity: float | None = None

    def attrs(self) -> list[tuple[str, str]]:
        out = [("fill", self.fill)]
        if self.fill_opacity is not None:
            out.append(("fill-opacity", fmt(self.fill_opacity)))
        if self.stroke is not None:
            out.append(("stroke", self.stroke))
        if self.stroke_width is not None:
            out.append(("stroke-width", fmt(self.stroke_width)))
        return out


@dataclass
class Path:
    rings: Sequence[Sequence[Point]]
    style: Style = field(default_factory=Style)
    id: str | None = None
    cls: str | None = None

    def d(self) -> str:
        parts = []
        for ring in self.rings:
            pts = list(ring)
            if len(pts) > 1 and tuple(pts[0]) == tuple(pts[-1]):
                pts = pts[:-1]
            if not pts:
                continue
            cmds = [f"M{fmt(pts[0][0])} {fmt(pts[0][1])}"]
            cmds += [f"L{fmt(x)} {fmt(y)}" for x, y in pts[1:]]
            parts.append(" ".join(cmds) + " Z")
        return " ".join(parts)


@dataclass
class Circle:
    cx: float
    cy: float
    r: float
    style: Style = field(default_factory=Style)
    id: str | None = None
    cls: str | None = None


@dataclass
class Rect:
    x: float
    y: float
    width: float
    height: float
    style: Style = field(default_factory=Style)
    id: str | None = None
    cls: str | None = None


@dataclass
class Text:
    x: float
    y: float
    text: str
    size: float = 11.0
    anchor: str = "start"
    fill: str = "#000000"
    id: str | None = None


@dataclass
class Group:
    children: list = field(default_factory=list)
    id: str | None = None
    opacity: float | None = None
    cls: str | None = None

    def add(self, *nodes) -> "Group":
        self.children.extend(nodes)
        return self


Node = Union[Path, Circle, Rect, Text, Group]


@dataclass
class Scene:
    """Root of a drawing. ``meta`` travels with the scene but is not drawn."""

    width: float
    height: float
    nodes: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, *nodes: Node) -> "Scene":
        self.nodes.extend(nodes)
        return self


def _open(tag: str, attrs: Iterable[tuple[str, str | None]], close: bool) -> str:
    a = "".join(f" {k}={quoteattr(v)}" for k, v in attrs if v is not None)
    return f"<{tag}{a}/>" if close else f"<{tag}{a}>"


def _emit(node: Node, out: list[str], depth: int) -> None:
    pad = "  " * depth
    if isinstance(node, Group):
        attrs = [("id", node.id), ("class", node.cls)]
        if node.opacity is not None:
            attrs.append(("opacity", fmt(node.opacity)))
        if not node.children:
            out.append(pad + _open("g", attrs, True))
            return
        out.append(pad + _open("g", attrs, False))
        for c in node.children:
            _emit(c, out, depth + 1)
        out.append(pad + "</g>")
    elif isinstance(node, Path):
        attrs = [("id", node.id), ("class", node.cls), ("d", node.d())]
        attrs += node.style.attrs()
        attrs.append(("fill-rule", "evenodd"))
        out.append(pad + _open("path", attrs, True))
    elif isinstance(node, Circle):
        attrs = [("id", node.id), ("class", node.cls), ("cx", fmt(node.cx)),
                 ("cy", fmt(node.cy)), ("r", fmt(node.r))] + node.style.attrs()
        out.append(pad + _open("circle", attrs, True))
    elif isinstance(node, Rect):
        attrs = [("id", node.id), ("class", node.cls), ("x", fmt(node.x)), ("y", fmt(node.y)),
                 ("width", fmt(node.width)), ("height", fmt(node.height))]
        attrs += node.style.attrs()
        out.append(pad + _open("rect", attrs, True))
    elif isinstance(node, Text):
        attrs = [("id", node.id), ("x", fmt(node.x)), ("y", fmt(node.y)),
                 ("font-size", fmt(node.size)), ("font-family", "sans-serif"),
                 ("text-anchor", node.anchor), ("fill", node.fill)]
        out.append(pad + _open("text", attrs, False) + escape(node.text) + "</text>")
    else:
        raise TypeError(f"unknown scene node {type(node).__name__}")


def write_svg(scene: Scene) -> bytes:
    w, h = fmt(scene.width), fmt(scene.height)
    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    root = _open("svg", [("xmlns", "http://www.w3.org/2000/svg"), ("version", "1.1"),
                         ("width", w), ("height", h), ("viewBox", f"0 0 {w} {h}")],
                 not scene.nodes)
    lines.append(root)
    if scene.nodes:
        for node in scene.nodes:
            _emit(node, lines, 1)
        lines.append("</svg>")
    return ("\n".join(lines) + "\n").encode("utf-8")


class Viewport:
    """Maps planar map units (y north-up) into a pixel box (y down).

    Aspect ratio is preserved; the map is centred in the box.
    """

    def __init__(self, bbox, x: float, y: float, width: float, height: float):
        self.bbox = bbox
        minx, miny, maxx, maxy = bbox
        bw, bh = maxx - minx, maxy - miny
        sx = width / bw if bw > 0 else math.inf
        sy = height / bh if bh > 0 else math.inf
        self.scale = min(sx, sy)
        if not math.isfinite(self.scale):
            self.scale = 1.0
        self.ox = x + 0.5 * (width - self.scale * bw)
        self.oy = y + 0.5 * (height - self.scale * bh)

    def point(self, p: Point) -> Point:
        minx, _, _, maxy = self.bbox
        return (self.ox + self.scale * (p[0] - minx), self.oy + self.scale * (maxy - p[1]))

    def ring(self, ring) -> list[Point]:
        return [self.point(p) for p in ring]

    def rings(self, rings) -> list[list[Point]]:
        return [self.ring(r) for r in rings]

    def length(self, d: float) -> float:
        return self.scale * d


# --- axonometric prisms ---------------------------------------------------

@dataclass(frozen=True)
class Camera:
    """Tilt ``pitch`` in degrees (90 = plan view); ``height_scale`` is the
    pixel height given to the largest extruded value."""

    pitch: float = 55.0
    height_scale: float = 120.0
    side_darken: float = 0.7

    def __post_init__(self):
        if not 0 < self.pitch <= 90:
            raise ValueError(f"pitch must be in (0, 90], got {self.pitch}")
        if self.height_scale < 0:
            raise ValueError("height_scale must be >= 0")

    @property
    def sin(self) -> float:
        return 1.0 if self.pitch == 90 else math.sin(math.radians(self.pitch))

    @property
    def cos(self) -> float:
        return 0.0 if self.pitch == 90 else math.cos(math.radians(self.pitch))

    def elevation(self, value: float, value_max: float) -> float:
        """Extrusion in pixels, linear in ``value``; ``value_max`` gets the full scale."""
        if value_max <= 0:
            return 0.0
        return self.height_scale * value / value_max


@dataclass
class PrismFaces:
    top: list[list[Point]]
    sides: list[list[Point]]
    depth_key: float
    id: str = ""


def _ring_signed_area(ring) -> float:
    s = 0.0
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def project_prism(rings: Sequence[Sequence[Point]], z: float, camera: Camera,
                  id: str = "") -> PrismFaces:
    """Project a footprint extruded by ``z`` pixels.

    ``rings`` are plan-view pixel coordinates (y down, north at the top),
    outer ring first. A plan point ``(x, y)`` at elevation ``z`` lands on
    ``(x, y*sin(pitch) - z*cos(pitch))``. Side quads are kept only for
    edges facing the viewer (outward normal pointing south, i.e. toward
    larger plan y). The depth key is the footprint's northernmost extent,
    ``-min(y)``, so far prisms sort first in ``depth_sort``.
    """
    if z < 0:
        raise ValueError("extrusion must be >= 0")
    s, c = camera.sin, camera.cos
    lift = z * c

    def base(p):
        return (p[0], p[1] * s)

    def top(p):
        return (p[0], p[1] * s - lift)

    tops = [[top(p) for p in ring] for ring in rings]
    sides: list[tuple[float, list[Point]]] = []
    if lift > 0:
        for k, ring in enumerate(rings):
            area = _ring_signed_area(ring)
            if area == 0:
                continue
            flip = (1.0 if area > 0 else -1.0) * (1.0 if k == 0 else -1.0)
            for p, q in zip(ring, ring[1:]):
                dx = q[0] - p[0]
                ny = -dx * flip
                if ny > 0:
                    quad = [base(p), base(q), top(q), top(p)]
                    sides.append((max(p[1], q[1]), quad))
    # within one prism, far sides first
    sides.sort(key=lambda t: t[0])
    ys = [p[1] for ring in rings for p in ring]
    depth = -min(ys) if ys else 0.0
    return PrismFaces(tops, [q for _, q in sides], depth, id)


def depth_sort(faces: Sequence[PrismFaces]) -> list[PrismFaces]:
    """Painter order: descending depth key, ties by id."""
    return sorted(faces, key=lambda f: (-f.depth_key, f.id))


def prism_nodes(faces: PrismFaces, fill: str, camera: Camera, *, stroke: str = "#333333",
                fill_opacity: float | None = None, prefix: str = "") -> Group:
    """Scene nodes for one prism: sides (darkened) under the top face."""
    g = Group(id=f"{prefix}{faces.id}:prism" if faces.id else None)
    side_fill = darken(fill, camera.side_darken)
    for i, quad in enumerate(faces.sides):
        g.add(Path([quad + [quad[0]]], Style(side_fill, stroke, 0.3, fill_opacity),
                   id=f"{prefix}{faces.id}:side:{i}", cls="side"))
    g.add(Path(faces.top, Style(fill, stroke, 0.5, fill_opacity),
               id=f"{prefix}{faces.id}", cls="top"))
    return g


# --- legends --------------------------------------------------------------

def _num(v: float, scale: float) -> str:
    return f"{v * scale:.4g}"


def interval_labels(breaks: Breaks, value_scale: float = 1.0) -> list[str]:
    """Lower-inclusive interval labels; the last class is closed above."""
    b = breaks.boundaries
    if not b:
        return [f"[{_num(breaks.lo, value_scale)}, {_num(breaks.hi, value_scale)}]"]
    labels = [f"< {_num(b[0], value_scale)}"]
    for lo, hi in zip(b, b[1:]):
        labels.append(f"[{_num(lo, value_scale)}, {_num(hi, value_scale)})")
    labels.append(f"≥ {_num(b[-1], value_scale)}")
    return labels


def legend(breaks: Breaks, palette: Palette, title: str, unit_label: str = "", *,
           x: float = 0.0, y: float = 0.0, swatch: float = 14.0,
           value_scale: float = 1.0, id: str = "legend") -> Group:
    if len(palette) != breaks.effective_k:
        raise ValueError(f"palette has {len(palette)} colours for "
                         f"{breaks.effective_k} classes")
    heading = f"{title} ({unit_label})" if unit_label else title
    g = Group(id=id, cls="legend")
    g.add(Text(x, y + 11, heading, size=12))
    for i, (color, label) in enumerate(zip(palette.colors,
                                           interval_labels(breaks, value_scale))):
        yy = y + 18 + i * (swatch + 4)
        g.add(Rect(x, yy, swatch, swatch, Style(color, "#555555", 0.5),
                   id=f"{id}:swatch:{i}", cls="swatch"))
        g.add(Text(x + swatch + 6, yy + swatch - 3, label))
    return g


def alpha_legend(scale: AlphaScale, title: str, labels: Sequence[str] | None = None, *,
                 color: str = "#000000", x: float = 0.0, y: float = 0.0,
                 swatch: float = 14.0, id: str = "legend-alpha") -> Group:
    g = Group(id=id, cls="legend")
    g.add(Text(x, y + 11, title, size=12))
    for i, a in enumerate(scale.levels):
        yy = y + 18 + i * (swatch + 4)
        g.add(Rect(x, yy, swatch, swatch, Style(color, "#555555", 0.5, a),
                   id=f"{id}:swatch:{i}", cls="swatch"))
        if labels is not None:
            g.add(Text(x + swatch + 6, yy + swatch - 3, labels[i]))
    return g


def ramp_legend(vmax: float, title: str, *, x: float = 0.0, y: float = 0.0,
                steps: int = 5, id: str = "legend-ramp", value_scale: float = 1.0) -> Group:
    """Swatches sampled from the continuous white-to-black ramp."""
    g = Group(id=id, cls="legend")
    g.add(Text(x, y + 11, title, size=12))
    for i in range(steps):
        v = vmax * i / (steps - 1)
        yy = y + 18 + i * 18
        g.add(Rect(x, yy, 14, 14, Style(gray_ramp(v, vmax), "#555555", 0.5),
                   id=f"{id}:swatch:{i}", cls="swatch"))
        g.add(Text(x + 20, yy + 11, _num(v, value_scale)))
    return g
