"""Region-level bivariate map designs.

Each design draws the statistic (rate) as a quantile-classed fill and adds
population through a second channel: a second panel, a combined value,
opacity, extrusion, glyph size, or region area.

Element ids: region fills are ``r:<id>``; derived marks append a suffix
(``r:<id>:glyph``, ``r:<id>:dot``, ``r:<id>:side:<n>``,
``r:<id>:highlight``). Panels are groups ``panel:<n>``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from . import geometry as geom
from .cartogram import (ContiguousParams, contiguous_cartogram, noncontiguous_layout,
                        place_region)
from .classify import (DEFAULT_K, AlphaScale, Breaks, Palette, alpha_for, classify,
                       gray_ramp, level_index, palette_for, parse_palette,
                       quantile_breaks)
from .errors import ValidationError
from .model import DataMap, RegionMap
from .scene import (Camera, Circle, Group, Path, Rect, Scene, Style, Text, Viewport,
                    alpha_legend, depth_sort, interval_labels, legend, prism_nodes,
                    project_prism, ramp_legend)

TECHNIQUES = ("choropleth", "juxtaposed", "absolute", "value_by_alpha", "prism3d",
              "bertillon", "dotmap", "cartogram", "noncontiguous")

BACKGROUND = "#ffffff"
OUTLINE = "#666666"
GLYPH_FRACTION = 0.6
LEGEND_WIDTH = 170.0
MARGIN = 10.0


@dataclass(frozen=True)
class RegionTechniqueSpec:
    technique: str = "choropleth"
    k: int = DEFAULT_K
    palette: tuple[str, ...] | None = None
    alpha: AlphaScale = field(default_factory=AlphaScale)
    camera: Camera = field(default_factory=Camera)
    w_max: float | None = None
    h_max: float | None = None
    r_max: float | None = None
    highlight: tuple[str, ...] = ()
    width: float = 800.0
    height: float = 600.0
    cartogram: ContiguousParams = field(default_factory=ContiguousParams)

    def validate(self, data: DataMap | None = None) -> None:
        if self.technique not in TECHNIQUES:
            raise ValidationError(f"unknown technique {self.technique!r}; "
                                  f"expected one of {', '.join(TECHNIQUES)}")
        if self.k < 1:
            raise ValidationError(f"classes must be >= 1, got {self.k}")
        if self.palette is not None:
            parse_palette(",".join(self.palette))
        for name in ("w_max", "h_max", "r_max"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.width <= LEGEND_WIDTH + 2 * MARGIN or self.height <= 2 * MARGIN:
            raise ValidationError("output too small")
        if data is not None:
            unknown = [h for h in self.highlight if h not in data.population]
            if unknown:
                raise ValidationError(f"highlight id(s) not in data: {', '.join(unknown)}")


def encode_bertillon(population: float, rate: float, pop_max: float,
                     w_max: float, h_max: float) -> tuple[float, float]:
    """Rectangle (width, height): width tracks population, height the rate,
    so the area tracks their product."""
    if not pop_max > 0:
        raise ValidationError("pop_max must be positive")
    return (w_max * population / pop_max, h_max * rate)


def encode_dot(population: float, pop_max: float, r_max: float) -> float:
    """Radius of an area-proportional circle."""
    if not pop_max > 0:
        raise ValidationError("pop_max must be positive")
    return r_max * math.sqrt(population / pop_max)


# --- shared drawing helpers ----------------------------------------------

def map_box(spec_width: float, spec_height: float, panels: int = 1):
    """Pixel boxes (x, y, w, h) for each panel, leaving room for legends."""
    usable = spec_width - LEGEND_WIDTH - MARGIN
    w = (usable - MARGIN * (panels - 1) - MARGIN) / panels
    return [(MARGIN + i * (w + MARGIN), MARGIN, w, spec_height - 2 * MARGIN)
            for i in range(panels)]


def class_colors(data: DataMap, breaks: Breaks, palette: Palette) -> dict[str, str]:
    return {rid: palette[classify(data.rate[rid], breaks)] for rid in data.ids}


def region_path(region, vp: Viewport, fill: str, *, opacity: float | None = None,
                stroke: str = OUTLINE, prefix: str = "r:") -> Path:
    return Path([vp.ring(r) for r in region.rings], Style(fill, stroke, 0.5, opacity),
                id=f"{prefix}{region.id}", cls="region")


def highlight_group(regionmap: RegionMap, ids: Sequence[str], vp: Viewport,
                    panel: int = 0) -> Group:
    g = Group(id=f"highlights:{panel}")
    for rid in ids:
        g.add(Path([vp.ring(r) for r in regionmap[rid].rings],
                   Style("none", "#111111", 3.0), id=f"r:{rid}:highlight", cls="highlight"))
    return g


def statistic_legend(breaks: Breaks, palette: Palette, x: float, y: float) -> Group:
    return legend(breaks, palette, "Rate", "%", x=x, y=y, value_scale=100.0)


def legend_x(spec) -> float:
    return spec.width - LEGEND_WIDTH


def _bbox_short_side_px(region, vp: Viewport) -> float:
    x0, y0, x1, y1 = geom.region_bbox(region)
    return vp.length(min(x1 - x0, y1 - y0))


def _glyph_cap(data: DataMap, key, vp: Viewport) -> float:
    host = max(data.ids, key=lambda rid: (key(rid), rid))
    return GLYPH_FRACTION * _bbox_short_side_px(data.map[host], vp)


def _by_population_desc(data: DataMap) -> list[str]:
    return sorted(data.ids, key=lambda rid: (-data.population[rid], rid))


def tilted_plan_viewport(bbox, box, camera: Camera) -> Viewport:
    """Viewport in plan pixels such that, once y is multiplied by sin(pitch),
    the map plus the tallest extrusion fits ``box``."""
    x, y, w, h = box
    s = camera.sin
    lift = camera.height_scale * camera.cos
    return Viewport(bbox, x, (y + lift) / s, w, max(h - lift, 1.0) / s)


# --- renderers ------------------------------------------------------------

def render_region_map(data: DataMap, spec: RegionTechniqueSpec | None = None) -> Scene:
    spec = spec or RegionTechniqueSpec()
    spec.validate(data)
    breaks = quantile_breaks([data.rate[r] for r in data.ids], spec.k)
    palette = palette_for(breaks, spec.palette)
    scene = Scene(spec.width, spec.height)
    scene.add(Rect(0, 0, spec.width, spec.height, Style(BACKGROUND), id="background"))
    scene.meta.update(technique=spec.technique, k=spec.k, effective_k=breaks.effective_k,
                      boundaries=list(breaks.boundaries), palette=list(palette.colors))
    render = _RENDERERS[spec.technique]
    render(scene, data, spec, breaks, palette)
    return scene


def _choropleth_panel(data: DataMap, vp: Viewport, colors: dict[str, str], n: int,
                      opacity: dict[str, float] | None = None) -> Group:
    g = Group(id=f"panel:{n}", cls="panel")
    for region in data.map.regions:
        g.add(region_path(region, vp, colors[region.id],
                          opacity=None if opacity is None else opacity[region.id]))
    return g


def _finish(scene: Scene, data: DataMap, spec, vp: Viewport, panel: Group, n: int = 0):
    if spec.highlight:
        panel.add(highlight_group(data.map, spec.highlight, vp, n))
    scene.add(panel)


def _choropleth(scene, data, spec, breaks, palette):
    (box,) = map_box(spec.width, spec.height)
    vp = Viewport(data.map.bbox, *box)
    panel = _choropleth_panel(data, vp, class_colors(data, breaks, palette), 0)
    _finish(scene, data, spec, vp, panel)
    scene.add(statistic_legend(breaks, palette, legend_x(spec), MARGIN))


def _juxtaposed(scene, data, spec, breaks, palette):
    left, right = map_box(spec.width, spec.height, panels=2)
    vl = Viewport(data.map.bbox, *left)
    vr = Viewport(data.map.bbox, *right)
    p0 = _choropleth_panel(data, vl, class_colors(data, breaks, palette), 0)
    _finish(scene, data, spec, vl, p0, 0)
    pmax = max(data.population.values())
    ramp = {rid: gray_ramp(data.population[rid], pmax) for rid in data.ids}
    p1 = _choropleth_panel(data, vr, ramp, 1)
    _finish(scene, data, spec, vr, p1, 1)
    scene.add(statistic_legend(breaks, palette, legend_x(spec), MARGIN))
    scene.add(ramp_legend(pmax, "Population", x=legend_x(spec),
                          y=MARGIN + 40 + 18 * breaks.effective_k))


def _absolute(scene, data, spec, breaks, palette):
    counts = {rid: data.absolute(rid) for rid in data.ids}
    abreaks = quantile_breaks(list(counts.values()), spec.k)
    apal = palette_for(abreaks, spec.palette)
    (box,) = map_box(spec.width, spec.height)
    vp = Viewport(data.map.bbox, *box)
    colors = {rid: apal[classify(counts[rid], abreaks)] for rid in data.ids}
    panel = _choropleth_panel(data, vp, colors, 0)
    _finish(scene, data, spec, vp, panel)
    scene.meta.update(effective_k=abreaks.effective_k, boundaries=list(abreaks.boundaries),
                      palette=list(apal.colors))
    scene.add(legend(abreaks, apal, "Population x rate", "persons",
                     x=legend_x(spec), y=MARGIN))


def _value_by_alpha(scene, data, spec, breaks, palette):
    (box,) = map_box(spec.width, spec.height)
    vp = Viewport(data.map.bbox, *box)
    pops = [data.population[r] for r in data.ids]
    alphas = {rid: alpha_for(data.population[rid], pops, spec.alpha) for rid in data.ids}
    panel = _choropleth_panel(data, vp, class_colors(data, breaks, palette), 0, alphas)
    _finish(scene, data, spec, vp, panel)
    scene.add(statistic_legend(breaks, palette, legend_x(spec), MARGIN))
    pbreaks = quantile_breaks(pops, spec.alpha.k_alpha)
    labels = _population_level_labels(pbreaks, spec.alpha.k_alpha)
    scene.add(alpha_legend(spec.alpha, "Population", labels, color="#253494",
                           x=legend_x(spec), y=MARGIN + 40 + 18 * breaks.effective_k))


def _population_level_labels(pbreaks: Breaks, n: int) -> list[str]:
    labels = interval_labels(pbreaks)
    if len(labels) == n:
        return labels
    # merged classes: blank the unused levels
    out = [""] * n
    for c, lab in enumerate(labels):
        out[level_index(c, pbreaks.effective_k, n)] = lab
    return out


def _prism3d(scene, data, spec, breaks, palette):
    (box,) = map_box(spec.width, spec.height)
    cam = spec.camera
    vp = tilted_plan_viewport(data.map.bbox, box, cam)
    colors = class_colors(data, breaks, palette)
    pmax = max(data.population.values())
    faces = []
    for region in data.map.regions:
        z = cam.elevation(data.population[region.id], pmax)
        faces.append(project_prism(vp.rings(region.rings), z, cam, id=region.id))
    panel = Group(id="panel:0", cls="panel")
    for f in depth_sort(faces):
        panel.add(prism_nodes(f, colors[f.id], cam, prefix="r:"))
    if spec.highlight:
        hl = Group(id="highlights:0")
        by_id = {f.id: f for f in faces}
        for rid in spec.highlight:
            hl.add(Path(by_id[rid].top, Style("none", "#111111", 3.0),
                        id=f"r:{rid}:highlight", cls="highlight"))
        panel.add(hl)
    scene.add(panel)
    scene.meta.update(pitch=cam.pitch, height_scale=cam.height_scale)
    scene.add(statistic_legend(breaks, palette, legend_x(spec), MARGIN))
    scene.add(Text(legend_x(spec), MARGIN + 60 + 18 * breaks.effective_k,
                   "Height: population"))


def _bertillon(scene, data, spec, breaks, palette):
    (box,) = map_box(spec.width, spec.height)
    vp = Viewport(data.map.bbox, *box)
    colors = class_colors(data, breaks, palette)
    panel = _choropleth_panel(data, vp, colors, 0)
    pmax = max(data.population.values())
    rmax = max(data.rate.values())
    w_max = spec.w_max or _glyph_cap(data, lambda r: data.population[r], vp)
    if spec.h_max is not None:
        h_max = spec.h_max
    elif rmax > 0:
        h_max = _glyph_cap(data, lambda r: data.rate[r], vp) / rmax
    else:
        h_max = w_max
    glyphs = Group(id="glyphs:0")
    for rid in _by_population_desc(data):
        w, h = encode_bertillon(data.population[rid], data.rate[rid], pmax, w_max, h_max)
        ax, ay = vp.point(geom.label_anchor(data.map[rid]))
        glyphs.add(Rect(ax - w / 2, ay - h / 2, w, h, Style(colors[rid], "#000000", 0.5),
                        id=f"r:{rid}:glyph", cls="glyph"))
    panel.add(glyphs)
    _finish(scene, data, spec, vp, panel)
    scene.meta.update(w_max=w_max, h_max=h_max)
    scene.add(statistic_legend(breaks, palette, legend_x(spec), MARGIN))
    scene.add(Text(legend_x(spec), MARGIN + 60 + 18 * breaks.effective_k,
                   "Width: population, height: rate"))


def _dotmap(scene, data, spec, breaks, palette):
    (box,) = map_box(spec.width, spec.height)
    vp = Viewport(data.map.bbox, *box)
    panel = _choropleth_panel(data, vp, class_colors(data, breaks, palette), 0)
    pmax = max(data.population.values())
    r_max = spec.r_max or 0.5 * _glyph_cap(data, lambda r: data.population[r], vp)
    dots = Group(id="dots:0")
    for rid in _by_population_desc(data):
        r = encode_dot(data.population[rid], pmax, r_max)
        cx, cy = vp.point(geom.label_anchor(data.map[rid]))
        dots.add(Circle(cx, cy, r, Style("#000000", "#ffffff", 0.5, 0.6),
                        id=f"r:{rid}:dot", cls="dot"))
    panel.add(dots)
    _finish(scene, data, spec, vp, panel)
    scene.meta.update(r_max=r_max)
    scene.add(statistic_legend(breaks, palette, legend_x(spec), MARGIN))
    scene.add(Text(legend_x(spec), MARGIN + 60 + 18 * breaks.effective_k,
                   "Circle area: population"))


def _cartogram(scene, data, spec, breaks, palette):
    result = contiguous_cartogram(data, spec.cartogram)
    deformed = data.with_map(result.map)
    (box,) = map_box(spec.width, spec.height)
    vp = Viewport(result.map.bbox, *box)
    panel = _choropleth_panel(deformed, vp, class_colors(data, breaks, palette), 0)
    _finish(scene, deformed, spec, vp, panel)
    scene.meta["cartogram"] = result.diagnostics()
    scene.meta["cartogram_map"] = result.map
    scene.add(statistic_legend(breaks, palette, legend_x(spec), MARGIN))
    scene.add(Text(legend_x(spec), MARGIN + 60 + 18 * breaks.effective_k,
                   "Area: population"))


def _noncontiguous(scene, data, spec, breaks, palette):
    layout = noncontiguous_layout(data)
    placed = RegionMap(tuple(place_region(r, layout.placements[r.id])
                             for r in data.map.regions), data.map.crs_note)
    extent = geom.bbox_union([data.map.bbox, placed.bbox])
    (box,) = map_box(spec.width, spec.height)
    vp = Viewport(extent, *box)
    moved = data.with_map(placed)
    panel = _choropleth_panel(moved, vp, class_colors(data, breaks, palette), 0)
    _finish(scene, moved, spec, vp, panel)
    scene.meta["noncontiguous"] = {
        "zoom": layout.zoom,
        "sweeps": layout.sweeps,
        "scales": {rid: p.scale for rid, p in layout.placements.items()},
        "translations": {rid: list(p.translation) for rid, p in layout.placements.items()},
    }
    scene.add(statistic_legend(breaks, palette, legend_x(spec), MARGIN))
    scene.add(Text(legend_x(spec), MARGIN + 60 + 18 * breaks.effective_k,
                   "Area: population"))


_RENDERERS = {
    "choropleth": _choropleth,
    "juxtaposed": _juxtaposed,
    "absolute": _absolute,
    "value_by_alpha": _value_by_alpha,
    "prism3d": _prism3d,
    "bertillon": _bertillon,
    "dotmap": _dotmap,
    "cartogram": _cartogram,
    "noncontiguous": _noncontiguous,
}
