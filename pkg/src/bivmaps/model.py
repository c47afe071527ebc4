"""Domain records and ingestion.

Geometry arrives as a GeoJSON FeatureCollection of planar (pre-projected)
``Polygon``/``MultiPolygon`` features with ``id`` and ``name`` properties.
Region statistics, cities and trial logs arrive as UTF-8 CSV.

Everything returned here is immutable after construction.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import geometry as geom
from .errors import GeometryError, ParseError, ValidationError

log = logging.getLogger(__name__)

Point = tuple[float, float]
Ring = tuple[Point, ...]
Polygon = tuple[Ring, ...]


@dataclass(frozen=True)
class Region:
    id: str
    name: str
    parts: tuple[Polygon, ...]

    @property
    def rings(self) -> tuple[Ring, ...]:
        """Rings of every part, outer rings before their holes."""
        return tuple(r for part in self.parts for r in part)

    @property
    def area(self) -> float:
        return geom.region_area(self)


@dataclass(frozen=True)
class RegionMap:
    regions: tuple[Region, ...]
    crs_note: str = ""
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        seen = set()
        for r in self.regions:
            if not r.id:
                raise ValidationError("region id must be non-empty")
            if r.id in seen:
                raise ValidationError(f"duplicate region id {r.id!r}")
            seen.add(r.id)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return geom.bbox_union(geom.region_bbox(r) for r in self.regions)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.regions]

    def __getitem__(self, region_id: str) -> Region:
        for r in self.regions:
            if r.id == region_id:
                return r
        raise KeyError(region_id)

    def __len__(self) -> int:
        return len(self.regions)


@dataclass(frozen=True)
class DataMap:
    """A RegionMap joined with per-region population and rate (fraction)."""

    map: RegionMap
    population: Mapping[str, float]
    rate: Mapping[str, float]

    def __post_init__(self):
        ids = set(self.map.ids)
        for name, table in (("population", self.population), ("rate", self.rate)):
            missing = [i for i in self.map.ids if i not in table]
            if missing:
                raise ValidationError(f"missing {name} for region(s) {', '.join(missing)}")
            orphans = sorted(set(table) - ids)
            if orphans:
                raise ValidationError(f"{name} given for unknown region(s) {', '.join(orphans)}")
        for rid in self.map.ids:
            if not self.population[rid] >= 0:
                raise ValidationError(f"region {rid!r}: negative population {self.population[rid]}")
            if not 0.0 <= self.rate[rid] <= 1.0:
                raise ValidationError(f"region {rid!r}: rate {self.rate[rid]} outside [0, 1]")

    @property
    def ids(self) -> list[str]:
        return self.map.ids

    def absolute(self, region_id: str) -> float:
        return self.population[region_id] * self.rate[region_id]

    def with_map(self, new_map: RegionMap) -> "DataMap":
        return DataMap(new_map, self.population, self.rate)


@dataclass(frozen=True)
class City:
    id: str
    region_id: str
    name: str
    location: Point
    population: float
    footprint: Ring | None = None


@dataclass(frozen=True)
class CityLayer:
    cities: tuple[City, ...]
    warnings: tuple[str, ...] = ()

    def __iter__(self):
        return iter(self.cities)

    def __len__(self) -> int:
        return len(self.cities)

    def in_regions(self, region_ids: Iterable[str]) -> list[City]:
        wanted = set(region_ids)
        return [c for c in self.cities if c.region_id in wanted]


@dataclass(frozen=True)
class TrialRecord:
    participant_id: str
    technique: str
    question: str
    question_set: str
    correct: int
    time_ms: float


@dataclass(frozen=True)
class Ranking:
    participant_id: str
    technique: str
    rank: int


@dataclass(frozen=True)
class TrialSet:
    records: tuple[TrialRecord, ...]
    rankings: tuple[Ranking, ...] = ()

    @property
    def techniques(self) -> list[str]:
        seen = dict.fromkeys(r.technique for r in self.records)
        seen.update(dict.fromkeys(r.technique for r in self.rankings))
        return list(seen)

    @property
    def questions(self) -> list[str]:
        return list(dict.fromkeys(r.question for r in self.records))


# --- geometry -------------------------------------------------------------

def _as_bytes_text(data: bytes | str) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8-sig")
    return data


def _normalize_ring(coords, region_id: str, ring_index: int, hole: bool) -> Ring:
    try:
        ring = tuple((float(c[0]), float(c[1])) for c in coords)
    except (TypeError, ValueError, IndexError) as exc:
        raise GeometryError(f"bad coordinates ({exc})", region_id=region_id,
                            ring_index=ring_index) from None
    if len(ring) < 4:
        raise GeometryError(f"degenerate ring: {len(ring)} vertices (need >= 4)",
                            region_id=region_id, ring_index=ring_index)
    if ring[0] != ring[-1]:
        raise GeometryError("ring is not closed", region_id=region_id,
                            ring_index=ring_index)
    if not all(math.isfinite(v) for p in ring for v in p):
        raise GeometryError("non-finite coordinate", region_id=region_id,
                            ring_index=ring_index)
    a = geom.ring_signed_area(ring)
    if a == 0.0:
        raise GeometryError("degenerate ring: zero area", region_id=region_id,
                            ring_index=ring_index)
    # outer rings counter-clockwise, holes clockwise
    if (a < 0) != hole:
        ring = ring[::-1]
    return ring


def _polygon_warnings(region_id: str, part: Polygon) -> list[str]:
    out = []
    for hi, hole in enumerate(part[1:], start=1):
        if not all(geom.point_in_ring(p, part[0]) for p in hole[:-1]):
            out.append(f"region {region_id!r}: hole ring {hi} is not inside its outer ring")
    return out


def parse_geometry(data: bytes | str, *, source: str | None = None) -> RegionMap:
    """Read a GeoJSON FeatureCollection into a RegionMap.

    Only ``Polygon`` and ``MultiPolygon`` geometries and the ``id`` and
    ``name`` properties are read; other members are ignored. Ring order
    within a feature is kept, ring winding is normalized.
    """
    try:
        doc = json.loads(_as_bytes_text(data))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed geometry document: {exc}", source=source) from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError("geometry document must be a FeatureCollection", source=source)
    features = doc.get("features")
    if not isinstance(features, list):
        raise ParseError("FeatureCollection has no 'features' list", source=source)

    regions: list[Region] = []
    seen: set[str] = set()
    warnings: list[str] = []
    for fi, feat in enumerate(features):
        if not isinstance(feat, dict):
            raise ParseError(f"feature {fi} is not an object", source=source)
        props = feat.get("properties") or {}
        rid = props.get("id", feat.get("id"))
        if rid is None or str(rid) == "":
            raise ParseError(f"feature {fi} has no id property", source=source)
        rid = str(rid)
        if rid in seen:
            raise GeometryError("duplicate region id", region_id=rid)
        seen.add(rid)
        g = feat.get("geometry") or {}
        gtype = g.get("type")
        coords = g.get("coordinates")
        if gtype == "Polygon":
            polys = [coords]
        elif gtype == "MultiPolygon":
            polys = coords
        else:
            raise ParseError(f"feature {rid!r}: unsupported geometry type {gtype!r}",
                             source=source)
        if not isinstance(polys, list) or not polys:
            raise GeometryError("empty geometry", region_id=rid)
        parts = []
        ring_index = 0
        for poly in polys:
            if not isinstance(poly, list) or not poly:
                raise GeometryError("polygon without outer ring", region_id=rid,
                                    ring_index=ring_index)
            rings = []
            for k, rc in enumerate(poly):
                rings.append(_normalize_ring(rc, rid, ring_index, hole=k > 0))
                ring_index += 1
            part = tuple(rings)
            if geom.polygon_area(part) <= 0:
                raise GeometryError("polygon has no positive area", region_id=rid)
            warnings.extend(_polygon_warnings(rid, part))
            parts.append(part)
        regions.append(Region(rid, str(props.get("name", rid)), tuple(parts)))
    for w in warnings:
        log.warning(w)
    return RegionMap(tuple(regions), crs_note=str(doc.get("crs_note", "")),
                     warnings=tuple(warnings))


def serialize_geometry(regionmap: RegionMap) -> bytes:
    feats = []
    for r in regionmap.regions:
        if len(r.parts) == 1:
            g = {"type": "Polygon", "coordinates": [[list(p) for p in ring] for ring in r.parts[0]]}
        else:
            g = {"type": "MultiPolygon",
                 "coordinates": [[[list(p) for p in ring] for ring in part] for part in r.parts]}
        feats.append({"type": "Feature", "properties": {"id": r.id, "name": r.name},
                      "geometry": g})
    doc = {"type": "FeatureCollection", "features": feats}
    if regionmap.crs_note:
        doc["crs_note"] = regionmap.crs_note
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


# --- tables ---------------------------------------------------------------

def _read_csv(data: bytes | str, required: Sequence[str], source: str | None):
    text = _as_bytes_text(data)
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        raise ParseError(f"CSV header missing column(s): {', '.join(missing)}", source=source)
    return list(reader)


def _num(value: str, column: str, row: int, source) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"column {column!r}: not a number: {value!r}",
                         source=source, row=row) from None
    if not math.isfinite(v):
        raise ParseError(f"column {column!r}: non-finite value {value!r}",
                         source=source, row=row)
    return v


def read_region_table(data: bytes | str, *, source: str | None = None
                      ) -> dict[str, tuple[float, float]]:
    """Parse the ``id,name,population,statistic`` CSV into id -> (pop, stat)."""
    rows = {}
    for i, rec in enumerate(_read_csv(data, ("id", "name", "population", "statistic"),
                                      source), start=1):
        rid = rec["id"]
        if rid in rows:
            raise ParseError(f"duplicate id {rid!r}", source=source, row=i)
        rows[rid] = (_num(rec["population"], "population", i, source),
                     _num(rec["statistic"], "statistic", i, source))
    return rows


def join_data(regionmap: RegionMap, rows: Mapping[str, tuple[float, float]],
              statistic_unit: str = "percent") -> DataMap:
    """Attach (population, statistic) rows to regions.

    ``statistic_unit`` is ``"percent"`` (divided by 100) or ``"fraction"``.
    """
    if statistic_unit not in ("percent", "fraction"):
        raise ValueError(f"statistic_unit must be 'percent' or 'fraction', not {statistic_unit!r}")
    ids = regionmap.ids
    missing = [i for i in ids if i not in rows]
    if missing:
        raise ValidationError(f"missing data row for region(s): {', '.join(missing)}")
    unknown = sorted(set(rows) - set(ids))
    if unknown:
        raise ValidationError(f"data row for unknown region(s): {', '.join(unknown)}")
    div = 100.0 if statistic_unit == "percent" else 1.0
    pop, rate = {}, {}
    for rid in ids:
        p, s = rows[rid]
        if p < 0:
            raise ValidationError(f"region {rid!r}: negative population {p}")
        r = s / div
        if not 0.0 <= r <= 1.0:
            raise ValidationError(f"region {rid!r}: statistic {s} out of range "
                                  f"({r} as a fraction is outside [0, 1])")
        pop[rid] = float(p)
        rate[rid] = r
    return DataMap(regionmap, pop, rate)


_WKT_POLYGON = re.compile(r"^\s*POLYGON\s*\(\s*\((.*?)\)", re.IGNORECASE | re.DOTALL)


def parse_wkt_polygon(text: str) -> Ring:
    """Outer ring of a WKT ``POLYGON``; holes are ignored."""
    m = _WKT_POLYGON.match(text)
    if not m:
        raise ValueError(f"not a WKT POLYGON: {text[:40]!r}")
    pts = []
    for pair in m.group(1).split(","):
        xs = pair.split()
        if len(xs) < 2:
            raise ValueError(f"bad WKT vertex {pair!r}")
        pts.append((float(xs[0]), float(xs[1])))
    if pts[0] != pts[-1]:
        pts.append(pts[0])
    if len(pts) < 4:
        raise ValueError("WKT ring has fewer than 4 vertices")
    if geom.ring_signed_area(pts) < 0:
        pts.reverse()
    return tuple(pts)


def parse_cities(data: bytes | str, datamap: DataMap, *, source: str | None = None
                 ) -> CityLayer:
    """Read the cities CSV (``id,region_id,name,x,y,population[,footprint]``).

    A city whose location is outside its declared region is kept; the
    mismatch is recorded in ``CityLayer.warnings``.
    """
    regionmap = datamap.map
    known = set(regionmap.ids)
    cities, warnings = [], []
    seen = set()
    for i, rec in enumerate(_read_csv(data, ("id", "region_id", "name", "x", "y", "population"),
                                      source), start=1):
        cid = rec["id"]
        if not cid:
            raise ParseError("empty city id", source=source, row=i)
        if cid in seen:
            raise ParseError(f"duplicate city id {cid!r}", source=source, row=i)
        seen.add(cid)
        rid = rec["region_id"]
        if rid not in known:
            raise ParseError(f"city {cid!r}: unknown region_id {rid!r}", source=source, row=i)
        pop = _num(rec["population"], "population", i, source)
        if pop < 0:
            raise ParseError(f"city {cid!r}: negative population {pop}", source=source, row=i)
        loc = (_num(rec["x"], "x", i, source), _num(rec["y"], "y", i, source))
        fp = None
        if rec.get("footprint"):
            try:
                fp = parse_wkt_polygon(rec["footprint"])
            except ValueError as exc:
                raise ParseError(f"city {cid!r}: footprint: {exc}", source=source, row=i) from None
        if not geom.point_in_region(loc, regionmap[rid]):
            warnings.append(f"city {cid!r} at {loc} lies outside region {rid!r}")
        cities.append(City(cid, rid, rec["name"], loc, pop, fp))
    for w in warnings:
        log.warning(w)
    return CityLayer(tuple(cities), tuple(warnings))


def parse_trials(trials: bytes | str, rankings: bytes | str | None = None, *,
                 source: str | None = None) -> TrialSet:
    records = []
    for i, rec in enumerate(_read_csv(
            trials, ("participant_id", "technique", "question", "question_set",
                     "correct", "time_ms"), source), start=1):
        c = rec["correct"].strip()
        if c not in ("0", "1"):
            raise ParseError(f"correct must be 0 or 1, got {c!r}", source=source, row=i)
        t = _num(rec["time_ms"], "time_ms", i, source)
        if t <= 0:
            raise ParseError(f"time_ms must be positive, got {t}", source=source, row=i)
        records.append(TrialRecord(rec["participant_id"], rec["technique"], rec["question"],
                                   rec["question_set"], int(c), t))
    ranks: list[Ranking] = []
    if rankings is not None:
        rsource = f"{source} (rankings)" if source else "rankings"
        for i, rec in enumerate(_read_csv(rankings, ("participant_id", "technique", "rank"),
                                          rsource), start=1):
            try:
                rank = int(rec["rank"])
            except ValueError:
                raise ParseError(f"rank is not an integer: {rec['rank']!r}",
                                 source=rsource, row=i) from None
            ranks.append(Ranking(rec["participant_id"], rec["technique"], rank))
        _check_rankings(ranks)
    return TrialSet(tuple(records), tuple(ranks))


def _check_rankings(ranks: Sequence[Ranking]) -> None:
    techniques = sorted({r.technique for r in ranks})
    by_p: dict[str, dict[str, int]] = {}
    for r in ranks:
        d = by_p.setdefault(r.participant_id, {})
        if r.technique in d:
            raise ValidationError(f"participant {r.participant_id!r} ranks "
                                  f"{r.technique!r} more than once")
        d[r.technique] = r.rank
    T = len(techniques)
    for pid, d in by_p.items():
        if sorted(d) != techniques:
            raise ValidationError(f"participant {pid!r} does not rank every technique")
        if sorted(d.values()) != list(range(1, T + 1)):
            raise ValidationError(f"participant {pid!r}: ranks {sorted(d.values())} "
                                  f"are not a permutation of 1..{T}")


def validate(datamap: DataMap, cities: CityLayer | None = None) -> list[str]:
    """Re-check every invariant; returns error messages (empty when valid)."""
    errors = []
    for r in datamap.map.regions:
        for k, ring in enumerate(r.rings):
            if len(ring) < 4 or ring[0] != ring[-1]:
                errors.append(f"region {r.id!r} ring {k}: not a closed ring of >= 4 vertices")
        if r.area <= 0:
            errors.append(f"region {r.id!r}: non-positive area")
    for rid in datamap.ids:
        if datamap.population[rid] < 0:
            errors.append(f"region {rid!r}: negative population")
        if not 0 <= datamap.rate[rid] <= 1:
            errors.append(f"region {rid!r}: rate outside [0, 1]")
    if cities is not None:
        known = set(datamap.ids)
        ids = [c.id for c in cities]
        if len(ids) != len(set(ids)):
            errors.append("duplicate city ids")
        for c in cities:
            if c.region_id not in known:
                errors.append(f"city {c.id!r}: unknown region {c.region_id!r}")
            if c.population < 0:
                errors.append(f"city {c.id!r}: negative population")
    return errors
