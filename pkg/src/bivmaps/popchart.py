"""City-level population overlays drawn over a rate choropleth.

Four overlays: black city footprints with population-graded opacity
(dasymetric), area-proportional dots, a kernel density heatmap, and
extruded city prisms coloured by their region's rate class.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geom
from .classify import (DEFAULT_K, AlphaScale, alpha_for, level_index, palette_for,
                       quantile_breaks)
from .errors import ValidationError
from .model import City, CityLayer, DataMap
from .scene import (Camera, Circle, Group, Path, Rect, Scene, Style, Text, Viewport,
                    alpha_legend, depth_sort, interval_labels, prism_nodes,
                    project_prism)
from .techniques import (BACKGROUND, LEGEND_WIDTH, MARGIN, OUTLINE, class_colors,
                         highlight_group, map_box, region_path, statistic_legend,
                         tilted_plan_viewport)

log = logging.getLogger(__name__)

VARIANTS = ("dasymetric", "dot", "heatmap", "prism")
INK = "#000000"
KERNEL_CUTOFF = 4.0


@dataclass(frozen=True)
class DensityGrid:
    origin: tuple[float, float]
    cell_size: tuple[float, float]
    weights: np.ndarray  # shape (ny, nx); row 0 is the southern edge

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def cell_bounds(self, i: int, j: int) -> tuple[float, float, float, float]:
        """(minx, miny, maxx, maxy) of row ``i``, column ``j``."""
        dx, dy = self.cell_size
        x0 = self.origin[0] + j * dx
        y0 = self.origin[1] + i * dy
        return (x0, y0, x0 + dx, y0 + dy)


@dataclass(frozen=True)
class PopchartSpec:
    variant: str = "dot"
    k: int = DEFAULT_K
    palette: tuple[str, ...] | None = None
    bandwidth: float | None = None
    resolution: int = 256
    camera: Camera = field(default_factory=Camera)
    r_max: float | None = None
    alpha: AlphaScale = field(default_factory=lambda: AlphaScale((0.2, 0.4, 0.6, 0.8, 1.0)))
    reference_density: float | None = None
    highlight: tuple[str, ...] = ()
    width: float = 800.0
    height: float = 600.0

    def validate(self, data: DataMap | None = None) -> None:
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown popchart variant {self.variant!r}; "
                                  f"expected one of {', '.join(VARIANTS)}")
        if self.k < 1:
            raise ValidationError(f"classes must be >= 1, got {self.k}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValidationError("bandwidth must be > 0")
        if self.resolution < 16:
            raise ValidationError("resolution must be >= 16")
        if self.r_max is not None and not self.r_max > 0:
            raise ValidationError("r_max must be > 0")
        if self.reference_density is not None and not self.reference_density > 0:
            raise ValidationError("reference_density must be > 0")
        if data is not None:
            unknown = [h for h in self.highlight if h not in data.population]
            if unknown:
                raise ValidationError(f"highlight id(s) not in data: {', '.join(unknown)}")


def default_bandwidth(data: DataMap) -> float:
    return 0.015 * geom.bbox_diagonal(data.map.bbox)


def kde_grid(cities: CityLayer, bandwidth: float, resolution: int | tuple[int, int],
             extent: tuple[float, float, float, float]) -> DensityGrid:
    """Persons per cell from a Gaussian kernel around every city.

    The kernel has unit mass and is cut off at four bandwidths; each cell
    takes the kernel value at its centre times the cell area.
    """
    if not bandwidth > 0:
        raise ValidationError("bandwidth must be > 0")
    nx, ny = (resolution, resolution) if isinstance(resolution, int) else resolution
    minx, miny, maxx, maxy = extent
    dx, dy = (maxx - minx) / nx, (maxy - miny) / ny
    if not (dx > 0 and dy > 0):
        raise ValidationError("extent must have positive width and height")
    w = np.zeros((ny, nx))
    if len(cities) == 0:
        log.warning("kde_grid: empty city layer, returning an all-zero grid")
        return DensityGrid((minx, miny), (dx, dy), w)

    h = bandwidth
    cut = KERNEL_CUTOFF * h
    norm = dx * dy / (2.0 * math.pi * h * h)
    for c in cities:
        if c.population <= 0:
            continue
        cx, cy = c.location
        j0 = max(0, int(math.floor((cx - cut - minx) / dx)))
        j1 = min(nx, int(math.ceil((cx + cut - minx) / dx)) + 1)
        i0 = max(0, int(math.floor((cy - cut - miny) / dy)))
        i1 = min(ny, int(math.ceil((cy + cut - miny) / dy)) + 1)
        if j0 >= j1 or i0 >= i1:
            continue
        xs = minx + (np.arange(j0, j1) + 0.5) * dx - cx
        ys = miny + (np.arange(i0, i1) + 0.5) * dy - cy
        r2 = ys[:, None] ** 2 + xs[None, :] ** 2
        k = np.exp(-0.5 * r2 / (h * h))
        k[r2 > cut * cut] = 0.0
        w[i0:i1, j0:j1] += c.population * norm * k
    return DensityGrid((minx, miny), (dx, dy), w)


def heatmap_cells(grid: DensityGrid) -> list[tuple[tuple[float, float, float, float], float]]:
    """Cells as ``(bounds, opacity)``; opacity saturates at the 99th
    percentile of the non-zero weights, and near-transparent cells
    (opacity < 1/255) are dropped."""
    w = grid.weights
    nz = w[w > 0]
    if nz.size == 0:
        return []
    p99 = float(np.percentile(nz, 99))
    out = []
    ny, nx = w.shape
    for i in range(ny):
        for j in range(nx):
            v = w[i, j]
            if v <= 0:
                continue
            a = min(1.0, v / p99)
            if a < 1.0 / 255.0:
                continue
            out.append((grid.cell_bounds(i, j), a))
    return out


def reference_density(data: DataMap) -> float:
    """Ten times the mean map density."""
    area = sum(r.area for r in data.map.regions)
    return 10.0 * sum(data.population.values()) / area


def city_footprint(city: City, density: float):
    """The city's own footprint, or a square of area population / density."""
    if city.footprint is not None:
        return city.footprint
    half = 0.5 * math.sqrt(city.population / density)
    x, y = city.location
    return ((x - half, y - half), (x + half, y - half), (x + half, y + half),
            (x - half, y + half), (x - half, y - half))


def render_popchart(data: DataMap, cities: CityLayer, spec: PopchartSpec | None = None
                    ) -> Scene:
    spec = spec or PopchartSpec()
    spec.validate(data)
    known = set(data.ids)
    for c in cities:
        if c.region_id not in known:
            raise ValidationError(f"city {c.id!r}: unknown region {c.region_id!r}")
    breaks = quantile_breaks([data.rate[r] for r in data.ids], spec.k)
    palette = palette_for(breaks, spec.palette)
    colors = class_colors(data, breaks, palette)

    scene = Scene(spec.width, spec.height)
    scene.add(Rect(0, 0, spec.width, spec.height, Style(BACKGROUND), id="background"))
    scene.meta.update(variant=spec.variant, k=spec.k, effective_k=breaks.effective_k,
                      boundaries=list(breaks.boundaries), palette=list(palette.colors))
    (box,) = map_box(spec.width, spec.height)
    lx, ly = spec.width - LEGEND_WIDTH, MARGIN
    below = ly + 40 + 18 * breaks.effective_k

    if spec.variant == "prism":
        panel = _prism_panel(data, cities, spec, box, colors, scene)
        scene.add(panel)
        scene.add(statistic_legend(breaks, palette, lx, ly))
        scene.add(Text(lx, below + 20, "Height: city population"))
        return scene

    vp = Viewport(data.map.bbox, *box)
    panel = Group(id="panel:0", cls="panel")
    for region in data.map.regions:
        panel.add(region_path(region, vp, colors[region.id]))
    overlay = Group(id="overlay:0", cls="overlay")
    ordered = sorted(cities, key=lambda c: (-c.population, c.id))
    pmax = max((c.population for c in cities), default=0.0)

    if spec.variant == "dasymetric":
        rho = spec.reference_density or reference_density(data)
        pops = [c.population for c in cities]
        for c in ordered:
            if c.footprint is None and c.population <= 0:
                continue
            a = alpha_for(c.population, pops, spec.alpha)
            overlay.add(Path([vp.ring(city_footprint(c, rho))], Style(INK, None, None, a),
                             id=f"c:{c.id}", cls="city"))
        scene.meta.update(reference_density=rho)
        legend_node = alpha_legend(spec.alpha, "City population",
                                   _level_labels(pops, spec.alpha) if pops else None,
                                   x=lx, y=below)
    elif spec.variant == "dot":
        r_max = spec.r_max or 0.05 * min(box[2], box[3])
        for c in ordered:
            r = r_max * math.sqrt(c.population / pmax) if pmax > 0 else 0.0
            cx, cy = vp.point(c.location)
            overlay.add(Circle(cx, cy, r, Style(INK, "#ffffff", 0.5, 0.6),
                               id=f"c:{c.id}", cls="city"))
        scene.meta.update(r_max=r_max)
        legend_node = Text(lx, below + 20, "Circle area: city population")
    else:
        bw = spec.bandwidth or default_bandwidth(data)
        grid = kde_grid(cities, bw, spec.resolution, data.map.bbox)
        for (x0, y0, x1, y1), a in heatmap_cells(grid):
            px0, py1 = vp.point((x0, y0))
            px1, py0 = vp.point((x1, y1))
            overlay.add(Rect(px0, py0, px1 - px0, py1 - py0, Style(INK, None, None, a),
                             cls="heat"))
        scene.meta.update(bandwidth=bw, resolution=spec.resolution,
                          grid_total=float(grid.weights.sum()))
        legend_node = Text(lx, below + 20, "Darkness: population density")

    panel.add(overlay)
    if spec.highlight:
        panel.add(highlight_group(data.map, spec.highlight, vp))
    scene.add(panel)
    scene.add(statistic_legend(breaks, palette, lx, ly))
    scene.add(legend_node)
    return scene


def _level_labels(pops, scale: AlphaScale) -> list[str]:
    br = quantile_breaks(pops, scale.k_alpha)
    out = [""] * scale.k_alpha
    for c, lab in enumerate(interval_labels(br)):
        out[level_index(c, br.effective_k, scale.k_alpha)] = lab
    return out


def _prism_panel(data, cities, spec, box, colors, scene) -> Group:
    cam = spec.camera
    vp = tilted_plan_viewport(data.map.bbox, box, cam)
    panel = Group(id="panel:0", cls="panel")
    for region in data.map.regions:
        flat = project_prism(vp.rings(region.rings), 0.0, cam, id=region.id)
        panel.add(Path(flat.top, Style(colors[region.id], OUTLINE, 0.5),
                       id=f"r:{region.id}", cls="region"))
    if spec.highlight:
        hl = Group(id="highlights:0")
        for rid in spec.highlight:
            flat = project_prism(vp.rings(data.map[rid].rings), 0.0, cam)
            hl.add(Path(flat.top, Style("none", "#111111", 3.0), id=f"r:{rid}:highlight",
                        cls="highlight"))
        panel.add(hl)
    rho = spec.reference_density or reference_density(data)
    pmax = max((c.population for c in cities), default=0.0)
    faces, fill = [], {}
    for c in cities:
        if c.footprint is None and c.population <= 0:
            continue
        z = cam.elevation(c.population, pmax)
        faces.append(project_prism([vp.ring(city_footprint(c, rho))], z, cam, id=c.id))
        fill[c.id] = colors[c.region_id]
    overlay = Group(id="overlay:0", cls="overlay")
    for f in depth_sort(faces):
        overlay.add(prism_nodes(f, fill[f.id], cam, prefix="c:"))
    panel.add(overlay)
    scene.meta.update(pitch=cam.pitch, height_scale=cam.height_scale, reference_density=rho)
    return panel
