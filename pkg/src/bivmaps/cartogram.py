"""Cartogram layouts.

``noncontiguous_layout`` shrinks every region about its centroid by the
square root of its density relative to the densest region, then zooms all
regions together so the drawn area equals the original total. Regions that
end up larger than life are pushed apart until their boxes stop overlapping.

``contiguous_cartogram`` is a rubber-sheet solver in the style of
Dougenik, Chrisman & Niemeyer (1985): every region pushes (or pulls) every
vertex radially from its centroid. The displacement of a vertex depends
only on its position, so vertices shared between regions stay shared.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import geometry as geom
from .errors import ConvergenceError, ValidationError
from .geometry import AffinePlacement
from .model import DataMap, Region, RegionMap

POPULATION_FLOOR = 1e-3


def floored_populations(data: DataMap, floor: float = POPULATION_FLOOR) -> dict[str, float]:
    """Zero populations replaced by ``floor`` times the largest population."""
    pmax = max(data.population.values(), default=0.0)
    fill = floor * pmax if pmax > 0 else 1.0
    return {rid: (p if p > 0 else fill) for rid, p in data.population.items()}


def shrink_factor(population: float, area: float, max_density: float,
                  floor_density: float | None = None) -> float:
    """``sqrt((population / area) / max_density)``.

    A zero population is evaluated at ``floor_density`` (default 0.1% of
    ``max_density``).
    """
    if not area > 0:
        raise ValidationError(f"area must be positive, got {area}")
    if not max_density > 0:
        raise ValidationError(f"max_density must be positive, got {max_density}")
    if population < 0:
        raise ValidationError(f"population must be >= 0, got {population}")
    density = population / area
    if density == 0:
        density = POPULATION_FLOOR * max_density if floor_density is None else floor_density
    if density > max_density * (1 + 1e-12):
        raise ValidationError(f"density {density} exceeds max_density {max_density}")
    return min(1.0, math.sqrt(density / max_density))


@dataclass(frozen=True)
class NonContiguousLayout:
    placements: Mapping[str, AffinePlacement]
    zoom: float
    shrink: Mapping[str, float]
    sweeps: int = 0

    def scale(self, region_id: str) -> float:
        return self.placements[region_id].scale


def _scaled_box(bbox, p: AffinePlacement):
    (x0, y0), (x1, y1) = p.apply((bbox[0], bbox[1])), p.apply((bbox[2], bbox[3]))
    return (min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))


def _boxes_overlap(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def noncontiguous_layout(data: DataMap, *, step_fraction: float = 0.02,
                         max_sweeps: int = 1000) -> NonContiguousLayout:
    regions = data.map.regions
    pops = floored_populations(data)
    areas = {r.id: geom.region_area(r) for r in regions}
    for rid, a in areas.items():
        if not a > 0:
            raise ValidationError(f"region {rid!r} has non-positive area")
    dens = {rid: pops[rid] / areas[rid] for rid in areas}
    dmax = max(dens.values())
    sf = {rid: shrink_factor(pops[rid], areas[rid], dmax) for rid in areas}
    total = sum(areas.values())
    shown = sum(sf[rid] ** 2 * areas[rid] for rid in areas)
    zoom = math.sqrt(total / shown)

    anchors = {r.id: geom.region_centroid(r) for r in regions}
    bboxes = {r.id: geom.region_bbox(r) for r in regions}
    placements = {rid: AffinePlacement(sf[rid] * zoom, (0.0, 0.0), anchors[rid])
                  for rid in areas}

    step = step_fraction * geom.bbox_diagonal(data.map.bbox)
    big = sorted((rid for rid in areas if placements[rid].scale > 1.0),
                 key=lambda rid: (-placements[rid].scale, rid))
    # Each sweep steps every big region that still overlaps a bigger one.
    # The step direction is fixed when the region first overlaps something,
    # so a region moves along a ray and cannot oscillate between neighbours.
    heading: dict[str, tuple[float, float]] = {}
    sweeps = 0
    while True:
        moved = False
        for k, rid in enumerate(big):
            p = placements[rid]
            mine = _scaled_box(bboxes[rid], p)
            hit = next((q for q in big[:k]
                        if _boxes_overlap(mine, _scaled_box(bboxes[q], placements[q]))), None)
            if hit is None:
                continue
            if rid not in heading:
                q = placements[hit]
                cx = p.anchor[0] + p.translation[0] - (q.anchor[0] + q.translation[0])
                cy = p.anchor[1] + p.translation[1] - (q.anchor[1] + q.translation[1])
                n = math.hypot(cx, cy)
                heading[rid] = (1.0, 0.0) if n == 0 else (cx / n, cy / n)
            ux, uy = heading[rid]
            placements[rid] = AffinePlacement(
                p.scale, (p.translation[0] + step * ux, p.translation[1] + step * uy), p.anchor)
            moved = True
        if not moved:
            break
        sweeps += 1
        if sweeps >= max_sweeps:
            raise ConvergenceError(f"region separation did not settle after {max_sweeps} sweeps")
    return NonContiguousLayout(placements, zoom, sf, sweeps)


def place_region(region: Region, p: AffinePlacement) -> Region:
    parts = tuple(tuple(tuple(r) for r in map(tuple, geom.apply_placement(part, p)))
                  for part in region.parts)
    return Region(region.id, region.name, parts)


# --- contiguous rubber-sheet ---------------------------------------------

@dataclass(frozen=True)
class ContiguousParams:
    max_iterations: int = 128
    target_mean_error: float = 0.02
    force_damping: float = 0.25

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not 0 < self.target_mean_error < 1:
            raise ValidationError("target_mean_error must be in (0, 1)")
        if not 0 < self.force_damping <= 1:
            raise ValidationError("force_damping must be in (0, 1]")


@dataclass
class ContiguousResult:
    map: RegionMap
    iterations: int
    converged: bool
    error_history: list[float]
    areas: dict[str, float]
    relative_errors: dict[str, float]
    folds: int
    max_displacement: float = 0.0

    @property
    def final_mean_error(self) -> float:
        return self.error_history[-1]

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_mean_error": self.final_mean_error,
            "initial_mean_error": self.error_history[0],
            "fold_count": self.folds,
            "max_displacement": self.max_displacement,
            "areas": self.areas,
            "relative_errors": self.relative_errors,
        }

    def diagnostics_json(self) -> str:
        return json.dumps(self.diagnostics(), indent=2, sort_keys=True)


class _Rings:
    """All rings of a map packed into one vertex array."""

    def __init__(self, regionmap: RegionMap):
        self.ids = regionmap.ids
        self.layout = []   # per region: list of parts, each list of (start, stop)
        chunks = []
        n = 0
        for r in regionmap.regions:
            parts = []
            for part in r.parts:
                rings = []
                for ring in part:
                    a = np.asarray(ring, dtype=float)
                    chunks.append(a)
                    rings.append((n, n + len(a)))
                    n += len(a)
                parts.append(rings)
            self.layout.append(parts)
        self.xy = np.concatenate(chunks)

    def moments(self, xy: np.ndarray):
        """Per-region (area, centroid x, centroid y)."""
        out = np.empty((len(self.ids), 3))
        for i, parts in enumerate(self.layout):
            A = MX = MY = 0.0
            for rings in parts:
                for k, (s, e) in enumerate(rings):
                    x0, y0 = xy[s:e - 1, 0], xy[s:e - 1, 1]
                    x1, y1 = xy[s + 1:e, 0], xy[s + 1:e, 1]
                    c = x0 * y1 - x1 * y0
                    a = 0.5 * c.sum()
                    # outer rings add, holes subtract, regardless of winding
                    sign = (1.0 if a >= 0 else -1.0) * (1.0 if k == 0 else -1.0)
                    A += sign * a
                    MX += sign * ((x0 + x1) * c).sum() / 6.0
                    MY += sign * ((y0 + y1) * c).sum() / 6.0
            out[i] = (A, MX / A if A else 0.0, MY / A if A else 0.0)
        return out

    def to_map(self, xy: np.ndarray, like: RegionMap) -> RegionMap:
        regions = []
        for r, parts in zip(like.regions, self.layout):
            new_parts = []
            for rings in parts:
                new_parts.append(tuple(tuple((float(x), float(y)) for x, y in xy[s:e])
                                       for s, e in rings))
            regions.append(Region(r.id, r.name, tuple(new_parts)))
        return RegionMap(tuple(regions), like.crs_note)

    def ring_slices(self):
        for parts in self.layout:
            for rings in parts:
                yield from rings


def _mean_error(areas: np.ndarray, pops: np.ndarray) -> np.ndarray:
    want = pops / pops.sum()
    have = areas / areas.sum()
    return np.abs(have - want) / want


def contiguous_cartogram(data: DataMap, params: ContiguousParams | None = None
                         ) -> ContiguousResult:
    """Deform the map so region areas approach population shares.

    Stops when the mean relative area error drops below
    ``params.target_mean_error`` or after ``params.max_iterations`` moves.
    """
    params = params or ContiguousParams()
    pack = _Rings(data.map)
    pops_d = floored_populations(data)
    pops = np.array([pops_d[rid] for rid in pack.ids], dtype=float)

    # forces act on distinct vertex positions only
    uniq, inverse = np.unique(pack.xy, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    start = uniq.copy()
    pts = uniq.copy()

    history: list[float] = []
    iterations = 0
    converged = False
    while True:
        xy = pts[inverse]
        mom = pack.moments(xy)
        areas = mom[:, 0]
        err = _mean_error(areas, pops)
        history.append(float(err.mean()))
        if history[-1] < params.target_mean_error:
            converged = True
            break
        if iterations >= params.max_iterations:
            break
        iterations += 1

        total = areas.sum()
        desired = total * pops / pops.sum()
        radius = np.sqrt(areas / math.pi)
        mass = np.sqrt(desired / math.pi) - radius

        disp = np.zeros_like(pts)
        for j in range(len(pack.ids)):
            d = pts - mom[j, 1:]
            dist = np.hypot(d[:, 0], d[:, 1])
            r = radius[j]
            outside = dist > r
            safe = np.where(dist > 0, dist, 1.0)
            f = np.where(outside, mass[j] * r / safe,
                         mass[j] * (dist ** 2 / r ** 2) * (4.0 - 3.0 * dist / r))
            f = np.where(dist > 0, f, 0.0)
            disp += (f / safe)[:, None] * d
        pts = pts + params.force_damping * disp

    out_xy = pts[inverse]
    final = pack.to_map(out_xy, data.map)
    folds = sum(_self_intersections(out_xy[s:e]) for s, e in pack.ring_slices())
    mom = pack.moments(out_xy)
    rel = _mean_error(mom[:, 0], pops)
    return ContiguousResult(
        map=final,
        iterations=iterations,
        converged=converged,
        error_history=history,
        areas={rid: float(a) for rid, a in zip(pack.ids, mom[:, 0])},
        relative_errors={rid: float(e) for rid, e in zip(pack.ids, rel)},
        folds=folds,
        max_displacement=float(np.hypot(*(pts - start).T).max()) if len(pts) else 0.0,
    )


def _self_intersections(ring: np.ndarray) -> int:
    """Count properly crossing pairs of non-adjacent edges in a closed ring."""
    p = ring[:-1]
    q = ring[1:]
    m = len(p)
    if m < 4:
        return 0

    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                       - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    count = 0
    for i in range(m - 2):
        j = np.arange(i + 2, m if i > 0 else m - 1)
        if not len(j):
            continue
        a, b = p[i], q[i]
        c, d = p[j], q[j]
        o1 = orient(a, b, c)
        o2 = orient(a, b, d)
        o3 = orient(c, d, np.broadcast_to(a, c.shape))
        o4 = orient(c, d, np.broadcast_to(b, c.shape))
        count += int(np.count_nonzero((o1 * o2 < 0) & (o3 * o4 < 0)))
    return count
