"""Ground-truth answers for the map-reading questions and the
counterbalanced order in which participants see each technique.

Every ranking breaks ties by id so answers are reproducible.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ValidationError
from .geometry import AdjacencyGraph
from .model import CityLayer, DataMap

METRICS = ("population", "rate", "absolute")


@dataclass(frozen=True)
class TaskResult:
    task: str
    answer: str
    support: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"task": self.task, "answer": self.answer, "support": self.support}


def absolute_count(region: str, data: DataMap) -> float:
    """Persons affected: population times rate."""
    return data.population[region] * data.rate[region]


def metric_value(region: str, data: DataMap, metric: str) -> float:
    if metric == "population":
        return data.population[region]
    if metric == "rate":
        return data.rate[region]
    if metric == "absolute":
        return absolute_count(region, data)
    raise ValidationError(f"unknown metric {metric!r}; expected one of {', '.join(METRICS)}")


def _check_regions(ids: Iterable[str], data: DataMap) -> None:
    unknown = [r for r in ids if r not in data.population]
    if unknown:
        raise ValidationError(f"unknown region id(s): {', '.join(unknown)}")


def rank_regions(data: DataMap, metric: str, candidates: Sequence[str] | None = None
                 ) -> list[str]:
    """Candidates ordered by descending metric, ties by ascending id."""
    cands = list(data.ids if candidates is None else candidates)
    if not cands:
        raise ValidationError("rank_regions needs at least one candidate")
    _check_regions(cands, data)
    return sorted(cands, key=lambda r: (-metric_value(r, data, metric), r))


def neighbor_argmax(region: str, data: DataMap, adj: AdjacencyGraph,
                    metric: str = "absolute") -> str:
    _check_regions([region], data)
    neigh = adj.get(region, frozenset())
    if not neigh:
        raise ValidationError(f"region {region!r} has no neighbours")
    return rank_regions(data, metric, sorted(neigh))[0]


def summarize_compare(set_a: Sequence[str], set_b: Sequence[str], data: DataMap,
                      metric: str = "absolute",
                      cities: CityLayer | None = None) -> TaskResult:
    """Compare the mean metric of two region sets.

    With ``cities`` and metric ``population``, region populations are summed
    from the city layer instead of read from the region table.
    """
    if not set_a or not set_b:
        raise ValidationError("both region sets must be non-empty")
    if metric not in ("absolute", "population"):
        raise ValidationError("summarize_compare metric must be 'absolute' or 'population'")
    _check_regions(list(set_a) + list(set_b), data)

    def value(r):
        if metric == "population" and cities is not None:
            return region_population_from_cities(r, cities)
        return metric_value(r, data, metric)

    ma = sum(value(r) for r in set_a) / len(set_a)
    mb = sum(value(r) for r in set_b) / len(set_b)
    verdict = compare_means(ma, mb)
    return TaskResult("summarize_compare", verdict, {"mean_a": ma, "mean_b": mb})


def compare_means(ma: float, mb: float, rel_tol: float = 1e-12) -> str:
    scale = max(abs(ma), abs(mb))
    if scale == 0 or abs(ma - mb) / scale < rel_tol:
        return "tie"
    return "A" if ma > mb else "B"


def biggest_city(regions: Iterable[str], cities: CityLayer) -> tuple[str, str]:
    """(city id, region id) of the most populous city in ``regions``."""
    scope = cities.in_regions(regions)
    if not scope:
        raise ValidationError("no cities in the given regions")
    best = min(scope, key=lambda c: (-c.population, c.id))
    return best.id, best.region_id


def region_population_from_cities(region: str, cities: CityLayer) -> float:
    return sum(c.population for c in cities if c.region_id == region)


# --- study design ---------------------------------------------------------

@dataclass(frozen=True)
class StudyDesign:
    orders: tuple[tuple[str, ...], ...]
    question_sets: tuple[tuple[str, ...], ...]

    @property
    def participants(self) -> int:
        return len(self.orders)

    def rows(self):
        for p, (order, sets) in enumerate(zip(self.orders, self.question_sets), start=1):
            for pos, (tech, qs) in enumerate(zip(order, sets), start=1):
                yield p, pos, tech, qs

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["participant_id", "position", "technique", "question_set"])
        w.writerows(self.rows())
        return buf.getvalue()


def balanced_latin_square(n: int) -> list[list[int]]:
    """Williams design rows. For odd ``n`` the square is followed by its
    mirror image, giving 2n rows."""
    if n < 1:
        raise ValidationError("need at least one condition")
    first, lo, hi = [0], 1, n - 1
    while len(first) < n:
        first.append(lo)
        lo += 1
        if len(first) < n:
            first.append(hi)
            hi -= 1
    rows = [[(c + r) % n for c in first] for r in range(n)]
    if n % 2 == 1 and n > 1:
        rows += [row[::-1] for row in rows]
    return rows


def generate_design(techniques: Sequence[str], question_sets: Sequence[str],
                    participants: int) -> StudyDesign:
    """Counterbalanced technique order plus rotating question sets.

    Participant ``p`` (0-based) follows row ``p mod rows`` of a balanced
    Latin square; at position ``j`` they answer question set
    ``question_sets[(p + j) mod S]``.
    """
    T, S = len(techniques), len(question_sets)
    if T < 1:
        raise ValidationError("need at least one technique")
    if len(set(techniques)) != T:
        raise ValidationError("technique labels must be distinct")
    if S < T:
        raise ValidationError(f"{S} question set(s) for {T} techniques; need S >= T")
    if participants < 1:
        raise ValidationError("need at least one participant")
    square = balanced_latin_square(T)
    orders, sets = [], []
    for p in range(participants):
        row = square[p % len(square)]
        orders.append(tuple(techniques[i] for i in row))
        sets.append(tuple(question_sets[(p + j) % S] for j in range(T)))
    return StudyDesign(tuple(orders), tuple(sets))


def oracle_query(task: str, data: DataMap, *, metric: str = "absolute",
                 candidates: Sequence[str] | None = None, region: str | None = None,
                 set_a: Sequence[str] = (), set_b: Sequence[str] = (),
                 adj: AdjacencyGraph | None = None,
                 cities: CityLayer | None = None) -> TaskResult:
    """Dispatch one named task; used by the command line."""
    if task == "rank":
        order = rank_regions(data, metric, candidates)
        return TaskResult(task, order[0], {
            "order": order, "values": {r: metric_value(r, data, metric) for r in order}})
    if task == "absolute":
        if region is None:
            raise ValidationError("task 'absolute' needs a region")
        _check_regions([region], data)
        return TaskResult(task, region, {"absolute": absolute_count(region, data)})
    if task == "neighbor_argmax":
        if region is None or adj is None:
            raise ValidationError("task 'neighbor_argmax' needs a region and adjacency")
        ans = neighbor_argmax(region, data, adj, metric)
        return TaskResult(task, ans, {
            "values": {r: metric_value(r, data, metric) for r in sorted(adj[region])}})
    if task == "compare":
        return summarize_compare(set_a, set_b, data, metric, cities)
    if task == "biggest_city":
        if cities is None:
            raise ValidationError("task 'biggest_city' needs a city layer")
        scope = list(candidates) if candidates else data.ids
        _check_regions(scope, data)
        cid, rid = biggest_city(scope, cities)
        return TaskResult(task, rid, {"city": cid, "populations": {
            c.id: c.population for c in cities.in_regions(scope)}})
    if task == "region_population":
        if region is None or cities is None:
            raise ValidationError("task 'region_population' needs a region and a city layer")
        _check_regions([region], data)
        return TaskResult(task, region,
                          {"population": region_population_from_cities(region, cities)})
    raise ValidationError(f"unknown task {task!r}")
