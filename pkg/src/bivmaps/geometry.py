"""Planar polygon measurements: area, centroid, adjacency, label anchors,
affine placement.

Rings are sequences of ``(x, y)`` pairs whose first and last vertices are
equal. A polygon is a sequence of rings, outer ring first, holes after.
Coordinates are planar map units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import GeometryError

Point = tuple[float, float]
Ring = Sequence[Point]


def _check_closed(ring: Ring) -> None:
    if len(ring) < 2 or tuple(ring[0]) != tuple(ring[-1]):
        raise GeometryError("ring is not closed (first vertex != last vertex)")


def ring_signed_area(ring: Ring) -> float:
    """Shoelace area; positive for counter-clockwise rings (y up)."""
    _check_closed(ring)
    a = np.asarray(ring, dtype=float)
    x, y = a[:, 0], a[:, 1]
    return 0.5 * float(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))


def polygon_area(rings: Sequence[Ring]) -> float:
    """Area of the outer ring minus the areas of its holes."""
    if not rings:
        return 0.0
    outer = abs(ring_signed_area(rings[0]))
    holes = sum(abs(ring_signed_area(r)) for r in rings[1:])
    return outer - holes


def _ring_moments(ring: Ring) -> tuple[float, float, float]:
    a = np.asarray(ring, dtype=float)
    x0, y0 = a[:-1, 0], a[:-1, 1]
    x1, y1 = a[1:, 0], a[1:, 1]
    cross = x0 * y1 - x1 * y0
    area = 0.5 * cross.sum()
    mx = ((x0 + x1) * cross).sum() / 6.0
    my = ((y0 + y1) * cross).sum() / 6.0
    return float(area), float(mx), float(my)


def _polygon_moments(rings: Sequence[Ring]) -> tuple[float, float, float]:
    area = mx = my = 0.0
    for i, ring in enumerate(rings):
        _check_closed(ring)
        a, x, y = _ring_moments(ring)
        # outer counts positive, holes negative, whatever their winding
        sign = (1.0 if a >= 0 else -1.0) * (1.0 if i == 0 else -1.0)
        area += sign * a
        mx += sign * x
        my += sign * y
    return area, mx, my


def centroid(rings: Sequence[Ring]) -> Point:
    """Area-weighted centroid of the outer ring minus holes."""
    area, mx, my = _polygon_moments(rings)
    if area <= 0.0:
        raise GeometryError("centroid of a zero-area polygon is undefined")
    return (mx / area, my / area)


def region_area(region) -> float:
    return sum(polygon_area(p) for p in region.parts)


def region_centroid(region) -> Point:
    area = mx = my = 0.0
    for part in region.parts:
        a, x, y = _polygon_moments(part)
        area += a
        mx += x
        my += y
    if area <= 0.0:
        raise GeometryError("centroid of a zero-area region is undefined",
                            region_id=region.id)
    return (mx / area, my / area)


def point_in_ring(pt: Point, ring: Ring) -> bool:
    """Even-odd crossing test. Points exactly on an edge may go either way."""
    x, y = pt
    inside = False
    n = len(ring) - 1
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[i + 1]
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < xc:
                inside = not inside
    return inside


def point_in_polygon(pt: Point, rings: Sequence[Ring]) -> bool:
    if not point_in_ring(pt, rings[0]):
        return False
    return not any(point_in_ring(pt, h) for h in rings[1:])


def point_in_region(pt: Point, region) -> bool:
    return any(point_in_polygon(pt, part) for part in region.parts)


def ring_bbox(ring: Ring) -> tuple[float, float, float, float]:
    a = np.asarray(ring, dtype=float)
    return (float(a[:, 0].min()), float(a[:, 1].min()),
            float(a[:, 0].max()), float(a[:, 1].max()))


def bbox_union(boxes: Iterable[tuple[float, float, float, float]]):
    boxes = list(boxes)
    return (min(b[0] for b in boxes), min(b[1] for b in boxes),
            max(b[2] for b in boxes), max(b[3] for b in boxes))


def region_bbox(region):
    return bbox_union(ring_bbox(p[0]) for p in region.parts)


def bbox_diagonal(bbox) -> float:
    return math.hypot(bbox[2] - bbox[0], bbox[3] - bbox[1])


class AdjacencyGraph(Mapping[str, frozenset]):
    """Symmetric, irreflexive neighbour sets keyed by region id."""

    def __init__(self, neighbors: Mapping[str, Iterable[str]]):
        self._n = {k: frozenset(v) for k, v in neighbors.items()}

    def __getitem__(self, key: str) -> frozenset:
        return self._n[key]

    def __iter__(self):
        return iter(self._n)

    def __len__(self) -> int:
        return len(self._n)

    def edges(self) -> set[tuple[str, str]]:
        return {(a, b) for a, ns in self._n.items() for b in ns if a < b}

    def __repr__(self) -> str:
        return f"AdjacencyGraph({len(self._n)} regions, {len(self.edges())} edges)"


def adjacency(regionmap, eps: float | None = None) -> AdjacencyGraph:
    """Regions are adjacent when they share a boundary segment.

    Two segments are shared when their endpoints coincide pairwise within
    ``eps``. Contact at a single corner does not make regions adjacent.
    ``eps`` defaults to 1e-9 times the bbox diagonal.
    """
    regions = list(regionmap.regions)
    if eps is None:
        eps = 1e-9 * bbox_diagonal(regionmap.bbox)
    if eps < 0:
        raise ValueError("eps must be >= 0")

    owners: list[int] = []
    pts: list[Point] = []
    starts: list[int] = []
    ends: list[int] = []
    for ri, region in enumerate(regions):
        for part in region.parts:
            for ring in part:
                base = len(pts)
                m = len(ring) - 1
                pts.extend((float(x), float(y)) for x, y in ring[:-1])
                for j in range(m):
                    starts.append(base + j)
                    ends.append(base + (j + 1) % m)
                    owners.append(ri)

    canon = _cluster_points(np.asarray(pts, dtype=float).reshape(-1, 2), eps)
    by_segment: dict[tuple[int, int], set[int]] = {}
    for s, e, owner in zip(starts, ends, owners):
        a, b = canon[s], canon[e]
        if a == b:
            continue
        key = (a, b) if a < b else (b, a)
        by_segment.setdefault(key, set()).add(owner)

    neigh: dict[str, set[str]] = {r.id: set() for r in regions}
    for owner_set in by_segment.values():
        if len(owner_set) < 2:
            continue
        for i in owner_set:
            for j in owner_set:
                if i != j:
                    neigh[regions[i].id].add(regions[j].id)
    return AdjacencyGraph(neigh)


def _cluster_points(pts: np.ndarray, eps: float) -> list[int]:
    """Map each point to a canonical representative within ``eps``."""
    n = len(pts)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n:
        tree = cKDTree(pts)
        for i, j in tree.query_pairs(r=eps, eps=0.0):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    return [find(i) for i in range(n)]


def label_anchor(region) -> Point:
    """A point inside the region's largest part for labels and glyphs.

    Returns the centroid when it falls inside the outer ring (holes are
    ignored); otherwise the midpoint of the longest horizontal chord through
    the ring's vertical midpoint.
    """
    part = max(region.parts, key=polygon_area)
    c = centroid(part)
    outer = part[0]
    if point_in_ring(c, outer):
        return c
    x0, y0, x1, y1 = ring_bbox(outer)
    return _chord_midpoint(outer, 0.5 * (y0 + y1))


def _chord_midpoint(ring: Ring, y: float) -> Point:
    xs = []
    n = len(ring) - 1
    for i in range(n):
        ax, ay = ring[i]
        bx, by = ring[i + 1]
        if (ay > y) != (by > y):
            xs.append(ax + (y - ay) * (bx - ax) / (by - ay))
    xs.sort()
    best = None
    for a, b in zip(xs[0::2], xs[1::2]):
        if best is None or b - a > best[1] - best[0]:
            best = (a, b)
    if best is None:
        c = centroid([ring])
        return c
    return (0.5 * (best[0] + best[1]), y)


@dataclass(frozen=True)
class AffinePlacement:
    """Uniform scaling about ``anchor`` followed by ``translation``."""

    scale: float
    translation: Point = (0.0, 0.0)
    anchor: Point = (0.0, 0.0)

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")

    def apply(self, pt: Point) -> Point:
        ax, ay = self.anchor
        tx, ty = self.translation
        return (ax + self.scale * (pt[0] - ax) + tx,
                ay + self.scale * (pt[1] - ay) + ty)


def apply_placement(rings: Sequence[Ring], p: AffinePlacement) -> list[list[Point]]:
    return [[p.apply(v) for v in ring] for ring in rings]
