"""Fixture builders and an SVG reader used across the test suite."""
from __future__ import annotations

import re
import xml.etree.ElementTree as ET

import numpy as np

from bivmaps.model import City, CityLayer, DataMap, Region, RegionMap

SVG_NS = "{http://www.w3.org/2000/svg}"


def square(x, y, s=1.0):
    return ((x, y), (x + s, y), (x + s, y + s), (x, y + s), (x, y))


def region(rid, ring, *holes):
    return Region(rid, rid, ((tuple(ring),) + tuple(tuple(h) for h in holes),))


def grid_map(nx, ny, size=1.0, prefix="r"):
    regions = [region(f"{prefix}{i}_{j}", square(i * size, j * size, size))
               for j in range(ny) for i in range(nx)]
    return RegionMap(tuple(regions))


def jittered_grid(nx, ny, seed=0, jitter=0.25, size=10.0):
    """Quads over a lattice whose interior nodes are jittered; neighbouring
    quads share vertices exactly."""
    rng = np.random.default_rng(seed)
    nodes = np.zeros((nx + 1, ny + 1, 2))
    for i in range(nx + 1):
        for j in range(ny + 1):
            dx = dy = 0.0
            if 0 < i < nx:
                dx = rng.uniform(-jitter, jitter)
            if 0 < j < ny:
                dy = rng.uniform(-jitter, jitter)
            nodes[i, j] = ((i + dx) * size, (j + dy) * size)
    quads = {}
    for j in range(ny):
        for i in range(nx):
            ring = [nodes[i, j], nodes[i + 1, j], nodes[i + 1, j + 1], nodes[i, j + 1],
                    nodes[i, j]]
            quads[(i, j)] = tuple((float(x), float(y)) for x, y in ring)
    return quads


def quad_point(ring, u, v):
    """Bilinear point inside a convex quad ring, u, v in (0, 1)."""
    p00, p10, p11, p01 = (np.asarray(p) for p in ring[:4])
    p = (1 - u) * (1 - v) * p00 + u * (1 - v) * p10 + u * v * p11 + (1 - u) * v * p01
    return (float(p[0]), float(p[1]))


def fixture_datamap(nx=5, ny=4, seed=1):
    """A jittered grid DataMap with distinct random populations and rates."""
    quads = jittered_grid(nx, ny, seed)
    rng = np.random.default_rng(seed + 100)
    regions, pops, rates = [], {}, {}
    n = nx * ny
    pop_values = rng.permutation(np.linspace(20_000, 2_000_000, n)).round()
    rate_values = rng.permutation(np.linspace(0.04, 0.16, n))
    for k, ((i, j), ring) in enumerate(sorted(quads.items(), key=lambda t: (t[0][1], t[0][0]))):
        rid = f"R{k:02d}"
        regions.append(Region(rid, f"Region {k}", ((ring,),)))
        pops[rid] = float(pop_values[k])
        rates[rid] = float(rate_values[k])
    return DataMap(RegionMap(tuple(regions)), pops, rates)


def fixture_cities(data: DataMap, per_region=2, seed=2, footprints=False):
    rng = np.random.default_rng(seed)
    cities = []
    k = 0
    for r in data.map.regions:
        ring = r.parts[0][0]
        for _ in range(per_region):
            u, v = rng.uniform(0.3, 0.7, 2)
            loc = quad_point(ring, u, v)
            pop = float(round(rng.uniform(5_000, 800_000)))
            fp = None
            if footprints and k % 2 == 0:
                h = 0.3
                fp = ((loc[0] - h, loc[1] - h), (loc[0] + h, loc[1] - h),
                      (loc[0] + h, loc[1] + h), (loc[0] - h, loc[1] + h),
                      (loc[0] - h, loc[1] - h))
            cities.append(City(f"C{k:03d}", r.id, f"City {k}", loc, pop, fp))
            k += 1
    return CityLayer(tuple(cities))


# --- classification oracle -----------------------------------------------

def brute_force_classes(values, k):
    """Sort, then class of the j-th smallest is floor(j*k/n). Ties go to the
    upper bin, so a run of equal values takes the class of its last position."""
    s = sorted(values)
    n = len(s)
    last = {}
    for j, v in enumerate(s):
        last[v] = j * k // n
    return [last[v] for v in values]


def dense_rank(classes):
    order = {c: i for i, c in enumerate(sorted(set(classes)))}
    return [order[c] for c in classes]


def oracle_classes(values: dict, k: int) -> dict:
    """id -> 0-based class, computed without the library."""
    ids = list(values)
    cls = dense_rank(brute_force_classes([values[i] for i in ids], k))
    return dict(zip(ids, cls))


def shoelace(ring) -> float:
    return 0.5 * abs(sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1)
                         in zip(ring, ring[1:] + ring[:1])))


# --- SVG parse-back -------------------------------------------------------

def parse_svg(data: bytes) -> ET.Element:
    return ET.fromstring(data)


def elements(root: ET.Element):
    """(tag, attrib, ancestor ids) for every element, document order."""
    out = []

    def walk(el, ancestors):
        tag = el.tag.replace(SVG_NS, "")
        out.append((tag, dict(el.attrib), ancestors))
        aid = el.attrib.get("id")
        for child in el:
            walk(child, ancestors + ([aid] if aid else []))

    walk(root, [])
    return out


def by_id(root: ET.Element) -> dict[str, list[dict]]:
    out: dict[str, list[dict]] = {}
    for tag, attrs, anc in elements(root):
        if "id" in attrs:
            out.setdefault(attrs["id"], []).append(dict(attrs, _tag=tag, _panels=[
                a for a in anc if a.startswith("panel:")]))
    return out


_NUM = re.compile(r"-?\d+(?:\.\d+)?")


def path_rings(d: str) -> list[list[tuple[float, float]]]:
    rings = []
    for chunk in d.split("Z"):
        nums = [float(v) for v in _NUM.findall(chunk)]
        if nums:
            rings.append(list(zip(nums[0::2], nums[1::2])))
    return rings
