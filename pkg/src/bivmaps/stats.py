"""Estimation statistics for the study logs.

Means with percentile-bootstrap 95% intervals, paired differences,
geometric means (bootstrap on log times, results antilogged), paired
time ratios and ranking tables. The participant is the resampling unit
everywhere. Nothing here draws from implicit entropy: every function takes
a seed (or a ``numpy.random.Generator`` to continue a stream).
"""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .model import Ranking, TrialSet
from .scene import Circle, Group, Path, Rect, Scene, Style, Text

DEFAULT_RESAMPLES = 10_000
MIN_RESAMPLES = 1000
_CHUNK = 2_000_000


@dataclass(frozen=True)
class Estimate:
    point: float
    ci_low: float
    ci_high: float
    n: int
    method: str


def _bootstrap_means(x: np.ndarray, resamples: int, seed) -> np.ndarray:
    if resamples < MIN_RESAMPLES:
        raise ValidationError(f"resamples must be >= {MIN_RESAMPLES}, got {resamples}")
    rng = np.random.default_rng(seed)
    n = len(x)
    rows = max(1, _CHUNK // n)
    out = np.empty(resamples)
    for start in range(0, resamples, rows):
        stop = min(resamples, start + rows)
        idx = rng.integers(0, n, size=(stop - start, n))
        out[start:stop] = x[idx].mean(axis=1)
    return out


def _percentile_estimate(x: np.ndarray, resamples: int, seed, method: str) -> Estimate:
    point = float(x.mean())
    if np.all(x == x[0]):
        # every resample is identical
        return Estimate(point, point, point, len(x), method)
    means = _bootstrap_means(x, resamples, seed)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return Estimate(point, min(float(lo), point), max(float(hi), point), len(x), method)


def _as_array(samples, what: str = "samples") -> np.ndarray:
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValidationError(f"{what} must be non-empty")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{what} contain non-finite values")
    return x


def bootstrap_mean_ci(samples: Sequence[float], resamples: int = DEFAULT_RESAMPLES, *,
                      seed) -> Estimate:
    """Mean with a 95% percentile-bootstrap interval."""
    return _percentile_estimate(_as_array(samples), resamples, seed, "percentile-bootstrap")


def pairwise_diff_ci(a: Sequence[float], b: Sequence[float],
                     resamples: int = DEFAULT_RESAMPLES, *, seed) -> Estimate:
    """Mean of ``a_i - b_i`` over participants, with a bootstrap interval."""
    x, y = _as_array(a, "a"), _as_array(b, "b")
    if len(x) != len(y):
        raise ValidationError(f"mismatched pairing: {len(x)} vs {len(y)} values")
    if len(x) < 2:
        raise ValidationError("need at least 2 pairs")
    return _percentile_estimate(x - y, resamples, seed, "percentile-bootstrap")


def _positive_logs(t, what: str) -> np.ndarray:
    x = _as_array(t, what)
    if np.any(x <= 0):
        raise ValidationError(f"{what} must be positive")
    # base 10 keeps powers of ten exact; the estimator does not depend on the base
    return np.log10(x)


def _antilog(e: Estimate) -> Estimate:
    return Estimate(10.0 ** e.point, 10.0 ** e.ci_low, 10.0 ** e.ci_high, e.n,
                    "antilogged-bootstrap")


def geometric_mean_ci(times: Sequence[float], resamples: int = DEFAULT_RESAMPLES, *,
                      seed) -> Estimate:
    """10**mean(log10 t) with the antilogged bootstrap interval of the mean log."""
    logs = _positive_logs(times, "times")
    return _antilog(_percentile_estimate(logs, resamples, seed, "percentile-bootstrap"))


def pairwise_ratio_ci(a: Sequence[float], b: Sequence[float],
                      resamples: int = DEFAULT_RESAMPLES, *, seed) -> Estimate:
    """How many times slower ``a`` is than ``b``: 10**mean(log10 a - log10 b)."""
    la, lb = _positive_logs(a, "a"), _positive_logs(b, "b")
    if len(la) != len(lb):
        raise ValidationError(f"mismatched pairing: {len(la)} vs {len(lb)} values")
    if len(la) < 2:
        raise ValidationError("need at least 2 pairs")
    return _antilog(_percentile_estimate(la - lb, resamples, seed, "percentile-bootstrap"))


# --- rankings -------------------------------------------------------------

@dataclass(frozen=True)
class RankSummary:
    techniques: tuple[str, ...]
    mean: dict
    median: dict
    sd: dict
    counts: dict  # technique -> tuple of counts for rank 1..T
    sd_convention: str = "population (divide by n)"

    def to_csv(self) -> str:
        T = len(self.techniques)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["technique", "mean", "median", "sd"] + [f"rank_{i}" for i in range(1, T + 1)])
        for t in self.techniques:
            w.writerow([t, f"{self.mean[t]:.4f}", f"{self.median[t]:.4f}", f"{self.sd[t]:.4f}"]
                       + list(self.counts[t]))
        return buf.getvalue()


def rank_summary(rankings: Sequence[Ranking]) -> RankSummary:
    techniques = tuple(dict.fromkeys(r.technique for r in rankings))
    T = len(techniques)
    by_t: dict[str, list[int]] = defaultdict(list)
    for r in rankings:
        if not 1 <= r.rank <= T:
            raise ValidationError(f"rank {r.rank} outside 1..{T}")
        by_t[r.technique].append(r.rank)
    mean, median, sd, counts = {}, {}, {}, {}
    for t in techniques:
        x = np.asarray(by_t[t], dtype=float)
        mean[t] = float(x.mean())
        median[t] = float(np.median(x))
        sd[t] = float(x.std(ddof=0))
        counts[t] = tuple(int((x == k).sum()) for k in range(1, T + 1))
    return RankSummary(techniques, mean, median, sd, counts)


# --- whole-log analysis ---------------------------------------------------

@dataclass(frozen=True)
class AnalysisRow:
    question: str
    technique: str
    measure: str
    estimate: Estimate


CSV_HEADER = ["question", "technique", "measure", "point", "ci_low", "ci_high", "n", "method"]


def _cells(trials: TrialSet):
    acc = defaultdict(lambda: defaultdict(list))
    tim = defaultdict(lambda: defaultdict(list))
    for r in trials.records:
        acc[(r.question, r.technique)][r.participant_id].append(r.correct)
        tim[(r.question, r.technique)][r.participant_id].append(r.time_ms)
    return acc, tim


def participant_values(trials: TrialSet):
    """Per (question, technique): participant -> (accuracy, geometric-mean time)."""
    acc, tim = _cells(trials)
    out = {}
    for key in acc:
        out[key] = {p: (float(np.mean(acc[key][p])),
                        float(10.0 ** np.mean(np.log10(tim[key][p]))))
                    for p in sorted(acc[key])}
    return out


def analyze(trials: TrialSet, resamples: int = DEFAULT_RESAMPLES, *, seed: int
            ) -> list[AnalysisRow]:
    """Estimates for every question x technique, and every technique pair.

    Draws come sequentially from one generator seeded with ``seed``, in the
    order of the returned rows.
    """
    if not trials.records:
        raise ValidationError("no trial records")
    rng = np.random.default_rng(seed)
    cells = participant_values(trials)
    techniques = trials.techniques
    rows: list[AnalysisRow] = []
    for q in trials.questions:
        present = [t for t in techniques if (q, t) in cells]
        for t in present:
            vals = cells[(q, t)]
            a = [v[0] for v in vals.values()]
            tm = [v[1] for v in vals.values()]
            rows.append(AnalysisRow(q, t, "accuracy", bootstrap_mean_ci(a, resamples, seed=rng)))
            rows.append(AnalysisRow(q, t, "time", geometric_mean_ci(tm, resamples, seed=rng)))
        for ta, tb in combinations(present, 2):
            va, vb = cells[(q, ta)], cells[(q, tb)]
            both = [p for p in va if p in vb]
            if len(both) < 2:
                continue
            rows.append(AnalysisRow(q, f"{ta} - {tb}", "accuracy_diff", pairwise_diff_ci(
                [va[p][0] for p in both], [vb[p][0] for p in both], resamples, seed=rng)))
            rows.append(AnalysisRow(q, f"{ta} / {tb}", "time_ratio", pairwise_ratio_ci(
                [va[p][1] for p in both], [vb[p][1] for p in both], resamples, seed=rng)))
    return rows


def rows_to_csv(rows: Sequence[AnalysisRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        e = r.estimate
        w.writerow([r.question, r.technique, r.measure, f"{e.point:.6f}", f"{e.ci_low:.6f}",
                    f"{e.ci_high:.6f}", e.n, e.method])
    return buf.getvalue()


def estimate_chart(rows: Sequence[AnalysisRow], measure: str, *, width: float = 640.0
                   ) -> Scene:
    """Dot-and-interval chart: one horizontal interval per technique,
    grouped by question, on a shared axis."""
    sel = [r for r in rows if r.measure == measure]
    label_w, pad, row_h = 220.0, 20.0, 16.0
    questions = list(dict.fromkeys(r.question for r in sel))
    height = pad * 2 + 30 + sum(22 + row_h * sum(1 for r in sel if r.question == q)
                                for q in questions)
    scene = Scene(width, height)
    scene.add(Rect(0, 0, width, height, Style("#ffffff"), id="background"))
    if not sel:
        return scene
    lo = min(r.estimate.ci_low for r in sel)
    hi = max(r.estimate.ci_high for r in sel)
    ref = {"accuracy_diff": 0.0, "time_ratio": 1.0}.get(measure)
    if ref is not None:
        lo, hi = min(lo, ref), max(hi, ref)
    if measure == "accuracy":
        lo, hi = min(lo, 0.0), max(hi, 1.0)
    if hi == lo:
        lo, hi = lo - 1, hi + 1
    x0, x1 = label_w, width - pad

    def sx(v):
        return x0 + (v - lo) / (hi - lo) * (x1 - x0)

    scene.add(Text(pad, pad, measure, size=13))
    axis = Group(id="axis")
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        axis.add(Text(sx(v), height - 4, f"{v:.3g}", size=9, anchor="middle"))
    if ref is not None:
        axis.add(Path([[(sx(ref), pad + 20), (sx(ref), height - pad)]],
                      Style("none", "#999999", 1.0), id="reference"))
    scene.add(axis)
    y = pad + 30
    for qi, q in enumerate(questions):
        g = Group(id=f"question:{qi}")
        g.add(Text(pad, y + 10, q, size=12))
        y += 22
        for r in (r for r in sel if r.question == q):
            e = r.estimate
            g.add(Text(pad + 10, y + 4, r.technique, size=10))
            g.add(Path([[(sx(e.ci_low), y), (sx(e.ci_high), y)]],
                       Style("none", "#000000", 1.5), cls="interval"))
            g.add(Circle(sx(e.point), y, 3.5, Style("#000000"), cls="point"))
            y += row_h
        scene.add(g)
    return scene
