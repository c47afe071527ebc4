import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bivmaps.errors import ValidationError
from bivmaps.model import Ranking, TrialRecord, TrialSet
from bivmaps.scene import write_svg
from bivmaps.stats import (analyze, bootstrap_mean_ci, estimate_chart, geometric_mean_ci,
                           pairwise_diff_ci, pairwise_ratio_ci, rank_summary, rows_to_csv)


def test_constant_samples():
    e = bootstrap_mean_ci([3.0] * 10, seed=1)
    assert (e.point, e.ci_low, e.ci_high) == (3.0, 3.0, 3.0)


def test_symmetric_binary_58():
    e = bootstrap_mean_ci([0, 1] * 29, seed=2)
    assert e.point == 0.5
    assert e.ci_low <= 0.5 <= e.ci_high
    assert e.ci_low < 0.5 < e.ci_high


def test_same_seed_same_interval():
    x = np.random.default_rng(0).normal(size=40)
    assert bootstrap_mean_ci(x, seed=9) == bootstrap_mean_ci(x, seed=9)


def test_resample_floor():
    with pytest.raises(ValidationError):
        bootstrap_mean_ci([1, 2, 3], 999, seed=0)


def test_pairwise_diff():
    a = [1.0, 2.0, 5.0]
    e = pairwise_diff_ci(a, a, seed=0)
    assert (e.point, e.ci_low, e.ci_high) == (0, 0, 0)
    e = pairwise_diff_ci([x + 1 for x in a], a, seed=0)
    assert (e.point, e.ci_low, e.ci_high) == (1, 1, 1)
    rng = np.random.default_rng(5)
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert pairwise_diff_ci(x, y, seed=0).point == pytest.approx(
        sum(p - q for p, q in zip(x, y)) / 30, rel=1e-12)
    with pytest.raises(ValidationError, match="mismatched"):
        pairwise_diff_ci([1, 2], [1, 2, 3], seed=0)


def test_geometric_mean():
    assert geometric_mean_ci([1, 10, 100], seed=0).point == 10.0
    assert geometric_mean_ci([5], seed=0).point == pytest.approx(5.0, rel=1e-15)
    t = np.random.default_rng(3).lognormal(7, 0.5, 50)
    prod_root = math.prod(t / 1000) ** (1 / 50) * 1000
    assert geometric_mean_ci(t, seed=0).point == pytest.approx(prod_root, rel=1e-9)
    with pytest.raises(ValidationError):
        geometric_mean_ci([1, 0], seed=0)


def test_pairwise_ratio():
    b = [100.0, 250.0, 400.0, 900.0]
    e = pairwise_ratio_ci([2 * v for v in b], b, seed=0)
    assert e.point == pytest.approx(2.0, rel=1e-15)
    assert e.ci_low == pytest.approx(2.0) and e.ci_high == pytest.approx(2.0)
    assert pairwise_ratio_ci(b, b, seed=0).point == 1.0
    rng = np.random.default_rng(8)
    x, y = rng.lognormal(7, 0.4, 20), rng.lognormal(7, 0.4, 20)
    direct = math.exp(sum(math.log(p) - math.log(q) for p, q in zip(x, y)) / 20)
    assert pairwise_ratio_ci(x, y, seed=0).point == pytest.approx(direct, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(1, 1e5), st.floats(1, 1e5)), min_size=2, max_size=30))
def test_ratio_reciprocity(pairs):
    a, b = zip(*pairs)
    r1 = pairwise_ratio_ci(a, b, seed=1).point
    r2 = pairwise_ratio_ci(b, a, seed=1).point
    assert abs(r1 * r2 - 1) <= 1e-12


def test_rank_summary_examples():
    rs = [Ranking(f"p{i}", "X", r) for i, r in enumerate((1, 2, 3))]
    rs += [Ranking(f"p{i}", t, r) for i, (t, r) in enumerate(
        (("Y", 2), ("Y", 3), ("Y", 1), ("Z", 3), ("Z", 1), ("Z", 2)))]
    s = rank_summary(rs)
    assert s.mean["X"] == 2 and s.median["X"] == 2 and s.counts["X"] == (1, 1, 1)
    first = rank_summary([Ranking(f"p{i}", "X", 1) for i in range(4)]
                         + [Ranking(f"p{i}", "Y", 2) for i in range(4)])
    assert first.mean["X"] == 1 and first.sd["X"] == 0


def test_rank_table_shape():
    rng = np.random.default_rng(2)
    techs = ["Deformed Cartogram", "Juxtaposed", "Bertillon", "3D"]
    rs = []
    for p in range(49):
        for t, r in zip(techs, rng.permutation(4) + 1):
            rs.append(Ranking(f"p{p}", t, int(r)))
    lines = rank_summary(rs).to_csv().splitlines()
    assert lines[0].split(",") == ["technique", "mean", "median", "sd",
                                   "rank_1", "rank_2", "rank_3", "rank_4"]
    for line in lines[1:]:
        cells = line.split(",")
        assert len(cells) == 8 and cells[0] in techs
        assert sum(int(c) for c in cells[4:]) == 49


def synthetic_trials(n=12, seed=0):
    rng = np.random.default_rng(seed)
    recs = []
    for p in range(n):
        for t, (acc, tm) in {"A": (0.8, 9000), "B": (0.6, 12000)}.items():
            for q in ("Q1", "Q2"):
                recs.append(TrialRecord(f"p{p}", t, q, "S1", int(rng.random() < acc),
                                        float(rng.lognormal(math.log(tm), 0.3))))
    return TrialSet(tuple(recs))


def test_analyze_rows_and_determinism():
    ts = synthetic_trials()
    rows = analyze(ts, 1000, seed=42)
    kinds = [(r.question, r.technique, r.measure) for r in rows]
    assert kinds[:6] == [("Q1", "A", "accuracy"), ("Q1", "A", "time"),
                         ("Q1", "B", "accuracy"), ("Q1", "B", "time"),
                         ("Q1", "A - B", "accuracy_diff"), ("Q1", "A / B", "time_ratio")]
    assert rows_to_csv(rows) == rows_to_csv(analyze(ts, 1000, seed=42))
    for r in rows:
        assert r.estimate.ci_low <= r.estimate.point <= r.estimate.ci_high
    svg = write_svg(estimate_chart(rows, "time_ratio"))
    assert svg.count(b'class="interval"') == 2
