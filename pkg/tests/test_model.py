import json
import re
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bivmaps import geometry as geom
from bivmaps.errors import GeometryError, ParseError, ValidationError
from bivmaps.model import (join_data, parse_cities, parse_geometry, parse_trials,
                           read_region_table, serialize_geometry, validate)

from helpers import square

DATA = Path(__file__).parent / "data"


def fc(*features):
    return json.dumps({"type": "FeatureCollection", "features": list(features)}).encode()


def feat(rid, *rings, name=None):
    return {"type": "Feature", "properties": {"id": rid, "name": name or rid},
            "geometry": {"type": "Polygon", "coordinates": [list(map(list, r)) for r in rings]}}


UNIT = square(0, 0)


def test_unit_square_region():
    m = parse_geometry(fc(feat("A", UNIT)))
    assert len(m) == 1
    assert m["A"].area == 1.0


def test_duplicate_id_rejected():
    with pytest.raises(GeometryError, match="duplicate"):
        parse_geometry(fc(feat("A", UNIT), feat("A", square(2, 0))))


def test_degenerate_rings_name_region_and_ring():
    with pytest.raises(GeometryError) as exc:
        parse_geometry(fc(feat("B", [(0, 0), (1, 0), (0, 0)])))
    assert exc.value.region_id == "B" and exc.value.ring_index == 0
    with pytest.raises(GeometryError, match="zero area"):
        parse_geometry(fc(feat("C", [(0, 0), (1, 0), (2, 0), (0, 0)])))


def test_malformed_document():
    with pytest.raises(ParseError):
        parse_geometry(b"{not json")
    with pytest.raises(ParseError):
        parse_geometry(b'{"type": "Feature"}')


def test_orientation_normalized():
    cw_outer = list(reversed(square(0, 0, 4)))
    ccw_hole = square(1, 1, 1)
    m = parse_geometry(fc(feat("A", cw_outer, ccw_hole)))
    outer, hole = m["A"].parts[0]
    assert geom.ring_signed_area(outer) > 0
    assert geom.ring_signed_area(hole) < 0
    assert m["A"].area == 15.0


def test_hole_outside_outer_is_a_warning():
    m = parse_geometry(fc(feat("A", square(0, 0), square(5, 5, 0.5))))
    assert any("hole" in w for w in m.warnings)


def test_multipolygon_and_ignored_members():
    doc = {"type": "FeatureCollection", "bbox": [0, 0, 9, 9], "features": [
        {"type": "Feature", "id": "ignored", "properties": {"id": "M", "name": "Multi", "x": 1},
         "geometry": {"type": "MultiPolygon",
                      "coordinates": [[list(map(list, square(0, 0)))],
                                      [list(map(list, square(3, 0)))]]}}]}
    m = parse_geometry(json.dumps(doc).encode())
    assert m["M"].name == "Multi"
    assert m["M"].area == 2.0


def test_fixture_96_regions_in_file_order():
    raw = (DATA / "departements96.geojson").read_text()
    # independent scan: every "id" property value in text order
    scanned = re.findall(r'"id":\s*"([^"]+)"', raw)
    m = parse_geometry(raw.encode())
    assert len(m) == 96
    assert m.ids == scanned


def test_roundtrip_identity():
    m = parse_geometry((DATA / "departements96.geojson").read_bytes())
    again = parse_geometry(serialize_geometry(m))
    assert again.ids == m.ids
    assert [r.parts for r in again.regions] == [r.parts for r in m.regions]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50),
                          st.integers(1, 9), st.booleans()), min_size=1, max_size=6,
                unique_by=lambda t: (t[0], t[1])))
def test_roundtrip_property(squares):
    feats = []
    for k, (x, y, s, flip) in enumerate(squares):
        ring = square(x * 10, y * 10, s)
        feats.append(feat(f"id{k}", ring[::-1] if flip else ring))
    m = parse_geometry(fc(*feats))
    again = parse_geometry(serialize_geometry(m))
    assert again.ids == m.ids and len(again) == len(m)
    assert [r.parts for r in again.regions] == [r.parts for r in m.regions]


# --- join_data ------------------------------------------------------------

@pytest.fixture
def two_squares():
    return parse_geometry(fc(feat("A", UNIT), feat("B", square(1, 0))))


def test_percent_conversion():
    m = parse_geometry(fc(feat("A", UNIT)))
    d = join_data(m, {"A": (100000, 8.0)}, "percent")
    assert d.rate["A"] == pytest.approx(0.08, abs=0, rel=1e-15)
    assert d.population["A"] == 100000


def test_missing_row_names_region(two_squares):
    with pytest.raises(ValidationError, match="B"):
        join_data(two_squares, {"A": (1, 1)})


def test_unknown_row(two_squares):
    with pytest.raises(ValidationError, match="unknown"):
        join_data(two_squares, {"A": (1, 1), "B": (1, 1), "Z": (1, 1)})


def test_out_of_range_rate():
    m = parse_geometry(fc(feat("A", UNIT)))
    with pytest.raises(ValidationError, match="out of range"):
        join_data(m, {"A": (100000, 140)}, "percent")
    with pytest.raises(ValidationError, match="negative"):
        join_data(m, {"A": (-1, 5)}, "percent")


@given(st.lists(st.tuples(st.integers(0, 10**7), st.floats(0, 100)), min_size=2, max_size=2))
def test_percent_equals_prescaled_fraction(rows):
    m = parse_geometry(fc(feat("A", UNIT), feat("B", square(1, 0))))
    pct = join_data(m, {"A": rows[0], "B": rows[1]}, "percent")
    frac = join_data(m, {"A": (rows[0][0], rows[0][1] / 100),
                         "B": (rows[1][0], rows[1][1] / 100)}, "fraction")
    assert pct.rate == frac.rate and pct.population == frac.population
    assert validate(pct) == []


def test_region_csv():
    rows = read_region_table(b"id,name,population,statistic\nA,Ain,100,8.5\n")
    assert rows == {"A": (100.0, 8.5)}
    with pytest.raises(ParseError, match="row 1"):
        read_region_table(b"id,name,population,statistic\nA,Ain,lots,8.5\n")


# --- cities ---------------------------------------------------------------

@pytest.fixture
def unit_data():
    m = parse_geometry(fc(feat("A", UNIT)))
    return join_data(m, {"A": (1_000_000, 10)})


HEAD = "id,region_id,name,x,y,population\n"


def test_city_inside(unit_data):
    layer = parse_cities((HEAD + "c1,A,Lyon,0.5,0.5,500000\n").encode(), unit_data)
    assert len(layer) == 1 and layer.warnings == ()


def test_city_outside_region_is_warning(unit_data):
    layer = parse_cities((HEAD + "c1,A,Far,5,5,10\n").encode(), unit_data)
    assert len(layer) == 1
    assert len(layer.warnings) == 1 and "outside" in layer.warnings[0]


@pytest.mark.parametrize("row,msg", [
    ("c1,Z,Nowhere,0.5,0.5,10", "unknown region"),
    ("c1,A,Neg,0.5,0.5,-3", "negative"),
])
def test_city_errors(unit_data, row, msg):
    with pytest.raises(ParseError, match=msg):
        parse_cities((HEAD + row + "\n").encode(), unit_data)


def test_duplicate_city(unit_data):
    with pytest.raises(ParseError, match="duplicate"):
        parse_cities((HEAD + "c1,A,a,0.5,0.5,1\nc1,A,b,0.5,0.5,1\n").encode(), unit_data)


def test_city_footprint_wkt(unit_data):
    text = HEAD.strip() + ",footprint\n" + \
        'c1,A,Lyon,0.5,0.5,5,"POLYGON ((0.4 0.4, 0.6 0.4, 0.6 0.6, 0.4 0.6, 0.4 0.4))"\n'
    layer = parse_cities(text.encode(), unit_data)
    fp = layer.cities[0].footprint
    assert fp[0] == fp[-1] and len(fp) == 5
    assert geom.polygon_area([fp]) == pytest.approx(0.04)


def test_fixture_cities_load():
    m = parse_geometry((DATA / "departements96.geojson").read_bytes())
    d = join_data(m, read_region_table((DATA / "departements96.csv").read_bytes()))
    layer = parse_cities((DATA / "cities96.csv").read_bytes(), d)
    assert len(layer) == 192 and layer.warnings == ()


# --- trials ---------------------------------------------------------------

TRIALS = "participant_id,technique,question,question_set,correct,time_ms\n"


def test_trials_wellformed():
    rows = "".join(f"p{p},t{t},Q1,S1,1,{1000 + p}\n" for p in (1, 2) for t in (1, 2))
    ts = parse_trials((TRIALS + rows).encode())
    assert len(ts.records) == 4


def test_zero_time_rejected_with_row():
    with pytest.raises(ParseError, match="row 2"):
        parse_trials((TRIALS + "p1,t1,Q1,S1,1,10\np1,t2,Q1,S1,0,0\n").encode())


def test_non_binary_correct():
    with pytest.raises(ParseError, match="0 or 1"):
        parse_trials((TRIALS + "p1,t1,Q1,S1,2,10\n").encode())


def test_rank_permutation_violation():
    ranks = b"participant_id,technique,rank\np1,a,1\np1,b,1\n"
    with pytest.raises(ValidationError, match="permutation"):
        parse_trials(TRIALS.encode(), ranks)
    ok = parse_trials(TRIALS.encode(), b"participant_id,technique,rank\np1,a,2\np1,b,1\n")
    assert len(ok.rankings) == 2
