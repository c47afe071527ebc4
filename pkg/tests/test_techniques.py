import pytest

from bivmaps.classify import YLGNBU
from bivmaps.errors import ValidationError
from bivmaps.model import DataMap, RegionMap
from bivmaps.scene import write_svg
from bivmaps.techniques import (TECHNIQUES, RegionTechniqueSpec, encode_bertillon,
                                encode_dot, render_region_map)

from helpers import by_id, fixture_datamap, oracle_classes, parse_svg, region, square
from parseback import PALETTE, check_technique


@pytest.fixture(scope="module")
def data():
    return fixture_datamap(5, 4, seed=1)


@pytest.mark.parametrize("technique", TECHNIQUES)
def test_parse_back(technique, data):
    check_technique(technique, data)


@pytest.mark.parametrize("technique", TECHNIQUES)
def test_render_deterministic(technique, data):
    spec = RegionTechniqueSpec(technique=technique)
    a = write_svg(render_region_map(data, spec))
    b = write_svg(render_region_map(data, spec))
    assert a == b


def test_bertillon_encoding():
    assert encode_bertillon(10_000, 1.0, 10_000, 50, 100) == (50, 100)
    w, h = encode_bertillon(5_000, 1.0, 10_000, 50, 100)
    assert (w, h) == (25, 100)
    w, h = encode_bertillon(1000, 0.10, 10_000, 50, 100)
    assert w == pytest.approx(5) and h == pytest.approx(10)
    assert w * h == pytest.approx(50 / 10_000 * 100 * 1000 * 0.10)


def test_dot_encoding():
    assert encode_dot(100, 100, 8) == 8
    assert encode_dot(25, 100, 8) == 4
    assert encode_dot(0, 100, 8) == 0


def test_choropleth_ten_regions():
    regions = tuple(region(f"g{i}", square(i, 0)) for i in range(10))
    rates = {f"g{i}": 0.01 * (i * 7 % 10 + 1) for i in range(10)}
    data = DataMap(RegionMap(regions), {r: 1000.0 for r in rates}, rates)
    ids = by_id(parse_svg(write_svg(render_region_map(data))))
    cls = oracle_classes(rates, 5)
    for rid in rates:
        assert ids[f"r:{rid}"][0]["fill"] == PALETTE[cls[rid]]


def test_absolute_two_regions():
    m = RegionMap((region("A", square(0, 0)), region("B", square(1, 0))))
    data = DataMap(m, {"A": 10.0, "B": 100.0}, {"A": 0.5, "B": 0.1})
    spec = RegionTechniqueSpec(technique="absolute", k=2)
    ids = by_id(parse_svg(write_svg(render_region_map(data, spec))))
    # products 5 and 10: B lands in the upper class
    low, high = YLGNBU[3][0], YLGNBU[3][-1]
    assert ids["r:A"][0]["fill"] == low and ids["r:B"][0]["fill"] == high


def test_highlights_and_validation(data):
    spec = RegionTechniqueSpec(highlight=("R03",))
    ids = by_id(parse_svg(write_svg(render_region_map(data, spec))))
    assert ids["r:R03:highlight"][0]["fill"] == "none"
    with pytest.raises(ValidationError, match="ZZ"):
        render_region_map(data, RegionTechniqueSpec(highlight=("ZZ",)))
    with pytest.raises(ValidationError):
        render_region_map(data, RegionTechniqueSpec(technique="pie"))


def test_cartogram_meta(data):
    scene = render_region_map(data, RegionTechniqueSpec(technique="cartogram"))
    diag = scene.meta["cartogram"]
    assert diag["final_mean_error"] <= diag["initial_mean_error"]
