"""Quantile classes, fill palettes and discrete opacity scales."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

# ColorBrewer YlGnBu, sequential
YLGNBU = {
    3: ("#edf8b1", "#7fcdbb", "#2c7fb8"),
    4: ("#ffffcc", "#a1dab4", "#41b6c4", "#225ea8"),
    5: ("#ffffcc", "#a1dab4", "#41b6c4", "#2c7fb8", "#253494"),
    6: ("#ffffcc", "#c7e9b4", "#7fcdbb", "#41b6c4", "#2c7fb8", "#253494"),
    7: ("#ffffcc", "#c7e9b4", "#7fcdbb", "#41b6c4", "#1d91c0", "#225ea8", "#0c2c84"),
    8: ("#ffffd9", "#edf8b1", "#c7e9b4", "#7fcdbb", "#41b6c4", "#1d91c0", "#225ea8",
        "#0c2c84"),
    9: ("#ffffd9", "#edf8b1", "#c7e9b4", "#7fcdbb", "#41b6c4", "#1d91c0", "#225ea8",
        "#253494", "#081d58"),
}
DEFAULT_K = 5
DEFAULT_PALETTE = YLGNBU[5]


@dataclass(frozen=True)
class Breaks:
    """Class boundaries; a value equal to a boundary belongs to the upper class."""

    k: int
    boundaries: tuple[float, ...]
    lo: float
    hi: float

    @property
    def effective_k(self) -> int:
        return len(self.boundaries) + 1


@dataclass(frozen=True)
class Palette:
    colors: tuple[str, ...]
    name: str = "custom"

    def __len__(self) -> int:
        return len(self.colors)

    def __getitem__(self, i: int) -> str:
        return self.colors[i]


@dataclass(frozen=True)
class AlphaScale:
    levels: tuple[float, ...] = (0.30, 0.65, 1.00)

    def __post_init__(self):
        lv = self.levels
        if not lv or any(not 0 < a <= 1 for a in lv):
            raise ValidationError("alpha levels must lie in (0, 1]")
        if any(b <= a for a, b in zip(lv, lv[1:])) or lv[-1] != 1.0:
            raise ValidationError("alpha levels must ascend strictly and end at 1.0")

    @property
    def k_alpha(self) -> int:
        return len(self.levels)

    @classmethod
    def evenly(cls, k: int) -> "AlphaScale":
        return cls(tuple(round((i + 1) / k, 6) for i in range(k)))


def quantile_breaks(values: Sequence[float], k: int = DEFAULT_K) -> Breaks:
    """Equal-count class boundaries.

    For n sorted values the i-th boundary is the first value of class i,
    ``sorted[ceil(i*n/k)]``, so class c holds the values at sorted indices
    ``j`` with ``floor(j*k/n) == c``. Boundaries that repeat, or that equal
    the minimum (which would leave a class empty), are merged away.
    """
    if len(values) == 0:
        raise ValidationError("cannot classify an empty list of values")
    if k < 1:
        raise ValidationError(f"class count must be >= 1, got {k}")
    s = sorted(float(v) for v in values)
    n = len(s)
    raw = []
    for i in range(1, k):
        j = math.ceil(i * n / k)
        if j < n:
            raw.append(s[j])
    bounds: list[float] = []
    for b in raw:
        if b > s[0] and (not bounds or b > bounds[-1]):
            bounds.append(b)
    return Breaks(k, tuple(bounds), s[0], s[-1])


def classify(value: float, breaks: Breaks) -> int:
    """0-based class index; bins are lower-inclusive."""
    return bisect.bisect_right(breaks.boundaries, value)


def default_scheme(k: int) -> tuple[str, ...]:
    """The YlGnBu colours palettes for ``k`` classes are drawn from."""
    return YLGNBU.get(k) or (YLGNBU[3] if k < 3 else YLGNBU[9])


def palette_for(breaks: Breaks, colors: Sequence[str] | None = None) -> Palette:
    """A palette with exactly ``breaks.effective_k`` colours.

    Without ``colors`` the YlGnBu scheme for ``breaks.k`` classes is used.
    When classes were merged, colours are picked evenly across the scheme so
    the darkest colour stays on the top class.
    """
    if colors is None:
        base = default_scheme(breaks.k)
        name = f"YlGnBu{len(base)}"
    else:
        base = tuple(colors)
        name = "custom"
    m = breaks.effective_k
    if m > len(base):
        raise ValidationError(f"palette has {len(base)} colours, {m} classes need colouring")
    if m == len(base):
        return Palette(tuple(base), name)
    if m == 1:
        return Palette((base[-1],), name)
    idx = np.round(np.linspace(0, len(base) - 1, m)).astype(int)
    return Palette(tuple(base[i] for i in idx), name)


def parse_palette(text: str) -> tuple[str, ...]:
    """Parse ``"#aabbcc,#112233"`` style CLI input."""
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok.startswith("#"):
            tok = "#" + tok
        if len(tok) != 7 or any(c not in "0123456789abcdef" for c in tok[1:]):
            raise ValidationError(f"not a hex colour: {tok!r}")
        out.append(tok)
    if not out:
        raise ValidationError("empty palette")
    return tuple(out)


def level_index(cls: int, effective_k: int, n_levels: int) -> int:
    """Map a class among ``effective_k`` onto ``n_levels`` ordered levels,
    keeping the top class on the top level."""
    if effective_k == n_levels:
        return cls
    if effective_k == 1:
        return n_levels - 1
    return int(round(cls * (n_levels - 1) / (effective_k - 1)))


def alpha_for(population: float, populations: Sequence[float],
              scale: AlphaScale | None = None) -> float:
    scale = scale or AlphaScale()
    br = quantile_breaks(populations, scale.k_alpha)
    c = classify(population, br)
    return scale.levels[level_index(c, br.effective_k, scale.k_alpha)]


def hex_to_rgb(color: str) -> tuple[int, int, int]:
    c = color.lstrip("#")
    return int(c[0:2], 16), int(c[2:4], 16), int(c[4:6], 16)


def rgb_to_hex(rgb) -> str:
    return "#%02x%02x%02x" % tuple(max(0, min(255, int(round(v)))) for v in rgb)


def darken(color: str, factor: float = 0.7) -> str:
    return rgb_to_hex(tuple(v * factor for v in hex_to_rgb(color)))


def gray_ramp(value: float, vmax: float) -> str:
    """Unclassed white (0) to black (vmax) ramp."""
    t = 0.0 if vmax <= 0 else min(1.0, max(0.0, value / vmax))
    g = int(round(255 * (1.0 - t)))
    return rgb_to_hex((g, g, g))
